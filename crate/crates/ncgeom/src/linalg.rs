//! Dense square complex matrices and the spectral routines built on them.
//!
//! Storage is row-major. Eigen- and singular-value work is delegated to
//! nalgebra; products are done here so they can skip zero entries (lattice
//! operators are mostly zeros) and split rows across workers.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::par;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V·diag(f(λ))·V*.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut scaled = v.clone();
        for i in 0..n {
            for j in 0..n {
                scaled.data[i * n + j] *= fv[j];
            }
        }
        scaled.matmul(&v.adjoint())
    }
}

impl ComplexMatrix {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    pub fn scalar(dim: usize, z: C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = z;
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| c64(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Self::new(m.nrows(), Self::from_fn(m.nrows(), |i, j| m[(i, j)]).data)
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).collect()
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&w| w * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(c64(x, 0.0))
    }

    /// self += z·other
    pub fn add_scaled(&mut self, z: C64, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += z * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        let a = &self.data;
        let b = &other.data;
        // rows of the product are independent; zero entries of the left factor
        // are skipped, which makes products with lattice operators cheap
        let rows_per_chunk = (4096 / n.max(1)).max(1);
        par::for_each_chunk_mut(&mut out, rows_per_chunk * n, |chunk_idx, chunk| {
            let first = chunk_idx * rows_per_chunk;
            for (r, out_row) in chunk.chunks_mut(n).enumerate() {
                let i = first + r;
                for k in 0..n {
                    let aik = a[i * n + k];
                    if aik.re == 0.0 && aik.im == 0.0 {
                        continue;
                    }
                    let brow = &b[k * n..(k + 1) * n];
                    for (o, bkj) in out_row.iter_mut().zip(brow) {
                        *o += aik * bkj;
                    }
                }
            }
        });
        Self { dim: n, data: out }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// (T + T*)/2
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| {
            (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5
        })
    }

    /// (T − T*)/(2i), so that T = Re T + i·Im T with both parts hermitian.
    pub fn skew_part(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| {
            (self.data[i * n + j] - self.data[j * n + i].conj()) * c64(0.0, -0.5)
        })
    }

    /// max |T − T*| entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j].norm() <= tol))
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        if self.hermitian_defect() <= 1e-14 * scale {
            return self
                .hermitian_part()
                .eigvalsh()
                .map(|v| v.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
                .unwrap_or(f64::NAN);
        }
        let gram = self.adjoint().matmul(self).hermitian_part();
        gram.eigvalsh()
            .map(|v| v.last().copied().unwrap_or(0.0).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    /// Eigen-decomposition of the hermitian part (callers pass hermitian input).
    pub fn eigh(&self) -> Result<HermitianEigen> {
        let m = self.hermitian_part().to_dmatrix();
        let eig = nalgebra::linalg::SymmetricEigen::try_new(m, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("hermitian eigensolver did not converge".into()))?;
        let n = self.dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(HermitianEigen { values, vectors })
    }

    /// Ascending eigenvalues of the hermitian part.
    pub fn eigvalsh(&self) -> Result<Vec<f64>> {
        let m = self.hermitian_part().to_dmatrix();
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .to_dmatrix()
            .singular_values()
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .to_dmatrix()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("matrix is singular".into()))?;
        Self::from_dmatrix(&inv)
    }

    /// Compression P·T·P onto the listed basis indices, as a smaller matrix.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let n = self.dim;
        Self::from_fn(idx.len(), |i, j| self.data[idx[i] * n + idx[j]])
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let n = self.dim;
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.data[rows[i] * n + cols[j]]
        })
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |i, j| {
            self.data[(i / m) * n + j / m] * other.data[(i % m) * m + j % m]
        })
    }

    /// Block-diagonal sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n + m, |i, j| match (i < n, j < n) {
            (true, true) => self.data[i * n + j],
            (false, false) => other.data[(i - n) * m + (j - n)],
            _ => ZERO,
        })
    }

    /// Cheap upper bound on the operator norm: sqrt(‖T‖₁‖T‖∞).
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim;
        let mut rows: f64 = 0.0;
        let mut cols = vec![0.0; n];
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                let v = self.data[i * n + j].norm();
                r += v;
                cols[j] += v;
            }
            rows = rows.max(r);
        }
        let c = cols.iter().fold(0.0, |m: f64, &x| m.max(x));
        (rows * c).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// T·a − a·T
pub fn commutator(t: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    t.check_same_dim(a)?;
    Ok(&t.matmul(a) - &a.matmul(t))
}

/// T·a + a·T
pub fn anticommutator(t: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    t.check_same_dim(a)?;
    Ok(&t.matmul(a) + &a.matmul(t))
}

/// Largest singular value of a (possibly rectangular) nalgebra matrix.
pub fn dmatrix_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}
