//! Connes spectral distance d(φ,ψ) = sup{|φ(a) − ψ(a)| : ‖[D,a]‖ ≤ 1},
//! restricted to selfadjoint elements in a graded span of generator monomials.
//!
//! Writing a = Σ_k y_k h_k over a hermitian spanning set h_k, the problem is
//! equivalent to t* = min ‖Σ_k y_k C_k‖ subject to l·y = 1, where
//! C_k = i[D,h_k] and l_k = φ(h_k) − ψ(h_k); then d = 1/t*. The minimum of
//! the spectral norm is found with a smoothed objective
//! f_μ(y) = μ log tr 2cosh(M(y)/μ), Newton steps with the exact Hessian and
//! a continuation μ → 0. Any feasible y certifies the lower bound 1/‖M(y)‖,
//! so the returned value never overshoots the restricted supremum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Chart;
use crate::linalg::{c64, ComplexMatrix, C64, I};
use crate::par;
use crate::span::monomials;
use crate::triple::{evaluate_state, PointState, SpectralTriple};

/// Default monomial degree of the search space.
pub const DEFAULT_DEGREE: usize = 3;
/// Relative accuracy the solver is built to reach on returned values.
pub const SOLVER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    /// The witnessing selfadjoint a, normalized so ‖[D,a]‖ ≤ 1.
    #[serde(skip)]
    pub optimizer: ComplexMatrix,
    /// 1 − ‖[D, optimizer]‖.
    pub constraint_slack: f64,
    pub search_degree: usize,
    /// Dimension of the reduced search space.
    pub span_dim: usize,
    pub unbounded: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Final smoothing relative to the current norm.
    pub mu_final: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu_final: 1e-10,
            max_newton: 60,
        }
    }
}

/// Hermitian spanning set of the monomial span: (w + w*)/2 and (w − w*)/(2i).
fn hermitian_span(triple: &SpectralTriple, degree: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::new();
    for m in monomials(triple, degree) {
        if m.word.is_empty() {
            continue;
        }
        let re = m.matrix.hermitian_part();
        let im = m.matrix.skew_part();
        for h in [re, im] {
            if h.max_abs() > 1e-14 * m.matrix.max_abs().max(1.0) {
                out.push(h);
            }
        }
    }
    out
}

pub fn connes_distance(
    triple: &SpectralTriple,
    phi: &PointState,
    psi: &PointState,
    degree: usize,
) -> Result<DistanceResult> {
    connes_distance_with(triple, phi, psi, degree, SolverConfig::default())
}

pub fn connes_distance_with(
    triple: &SpectralTriple,
    phi: &PointState,
    psi: &PointState,
    degree: usize,
    config: SolverConfig,
) -> Result<DistanceResult> {
    let hs = hermitian_span(triple, degree.max(1));
    if hs.is_empty() {
        return Err(Error::Precondition("search span is empty".into()));
    }
    let cs: Vec<ComplexMatrix> = par::map_slice(&hs, |h| triple.d(h).scale(I));
    let ls: Vec<f64> = hs
        .iter()
        .map(|h| Ok((evaluate_state(triple, phi, h)? - evaluate_state(triple, psi, h)?).re))
        .collect::<Result<_>>()?;
    let k = hs.len();
    let dim = triple.dim();
    let zero = |unbounded: bool, span_dim: usize, value: f64, a: ComplexMatrix| DistanceResult {
        value,
        optimizer: a,
        constraint_slack: 1.0,
        search_degree: degree,
        span_dim,
        unbounded,
    };
    let lnorm = ls.iter().map(|v| v * v).sum::<f64>().sqrt();
    if lnorm <= 1e-14 {
        return Ok(zero(false, 0, 0.0, ComplexMatrix::zeros(dim)));
    }
    // Frobenius Gram of the C_k and its range
    let gram = DMatrix::from_fn(k, k, |a, b| frob_inner(&cs[a], &cs[b]));
    let eig = SymmetricEigen::new(gram);
    let smax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let range: Vec<usize> = (0..k)
        .filter(|&r| eig.eigenvalues[r] > 1e-12 * smax)
        .collect();
    let kernel: Vec<usize> = (0..k)
        .filter(|&r| eig.eigenvalues[r] <= 1e-12 * smax)
        .collect();
    // functional on the kernel: elements with [D,a] = 0 but φ(a) ≠ ψ(a)
    for &r in &kernel {
        let v = eig.eigenvectors.column(r);
        let lv: f64 = (0..k).map(|i| v[i] * ls[i]).sum();
        if lv.abs() > 1e-8 * lnorm {
            let mut a = ComplexMatrix::zeros(dim);
            for i in 0..k {
                a.add_scaled(c64(v[i], 0.0), &hs[i]);
            }
            return Ok(zero(true, range.len(), f64::INFINITY, a));
        }
    }
    if range.is_empty() {
        return Ok(zero(false, 0, 0.0, ComplexMatrix::zeros(dim)));
    }
    let r = range.len();
    // orthonormal (Frobenius) basis B_j = Σ_i V_ij C_i / √σ_j
    let coef = DMatrix::from_fn(k, r, |i, j| {
        eig.eigenvectors[(i, range[j])] / eig.eigenvalues[range[j]].sqrt()
    });
    let bs: Vec<ComplexMatrix> = par::map_range(r, |j| {
        let mut b = ComplexMatrix::zeros(dim);
        for i in 0..k {
            if coef[(i, j)] != 0.0 {
                b.add_scaled(c64(coef[(i, j)], 0.0), &cs[i]);
            }
        }
        b.hermitian_part()
    });
    let lr = DVector::from_fn(r, |j, _| (0..k).map(|i| coef[(i, j)] * ls[i]).sum::<f64>());
    let y = minimize_norm(&bs, &lr, config)?;
    // witness a = Σ x_i h_i with x = coef·y
    let x = &coef * &y;
    let mut a = ComplexMatrix::zeros(dim);
    for i in 0..k {
        a.add_scaled(c64(x[i], 0.0), &hs[i]);
    }
    let a = a.hermitian_part();
    let norm = triple.d(&a).operator_norm();
    if !(norm > 0.0) {
        return Err(Error::Numerical(
            "distance solver returned a constant witness".into(),
        ));
    }
    let mut witness = a.scale_real(1.0 / norm);
    let mut cnorm = triple.d(&witness).operator_norm();
    if cnorm > 1.0 {
        witness = witness.scale_real(1.0 / cnorm);
        cnorm = triple.d(&witness).operator_norm();
    }
    let value =
        (evaluate_state(triple, phi, &witness)? - evaluate_state(triple, psi, &witness)?).norm();
    Ok(DistanceResult {
        value,
        optimizer: witness,
        constraint_slack: 1.0 - cnorm,
        search_degree: degree,
        span_dim: r,
        unbounded: false,
    })
}

fn frob_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

/// min ‖Σ_j y_j B_j‖ subject to l·y = 1.
fn minimize_norm(
    bs: &[ComplexMatrix],
    l: &DVector<f64>,
    config: SolverConfig,
) -> Result<DVector<f64>> {
    let r = bs.len();
    let l2 = l.norm_squared();
    let y0 = l / l2;
    if r == 1 {
        return Ok(y0);
    }
    // orthonormal complement of l
    let z = complement(l);
    let eval_y = |zv: &DVector<f64>| -> DVector<f64> { &y0 + &z * zv };
    let mut zv = DVector::zeros(r - 1);
    let assemble = |y: &DVector<f64>| -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(bs[0].dim());
        for j in 0..r {
            m.add_scaled(c64(y[j], 0.0), &bs[j]);
        }
        m.hermitian_part()
    };
    let spec_norm = |y: &DVector<f64>| -> Result<f64> {
        let v = assemble(y).eigvalsh()?;
        Ok(v.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
    };
    let mut t = spec_norm(&eval_y(&zv))?;
    let mut mu = 0.1 * t;
    while mu > config.mu_final * t {
        for _ in 0..config.max_newton {
            let y = eval_y(&zv);
            let sm = Smoothed::new(&assemble(&y), bs, mu)?;
            let g = z.transpose() * &sm.grad;
            let mut h = z.transpose() * &sm.hess * &z;
            let reg = 1e-14 * h.diagonal().amax().max(1e-300);
            for i in 0..h.nrows() {
                h[(i, i)] += reg;
            }
            let step = match h.clone().cholesky() {
                Some(c) => -c.solve(&g),
                None => -&g,
            };
            let decrement = -g.dot(&step);
            // f_μ is known to about 1e-15·t; below that Newton only chases rounding
            if decrement.abs() < 1e-13 * t.max(1e-300) {
                break;
            }
            // backtracking on f_μ
            let f0 = sm.value;
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &zv + &step * s;
                let ft = Smoothed::value_only(&assemble(&eval_y(&trial)), mu)?;
                if ft <= f0 - 0.25 * s * decrement {
                    zv = trial;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        t = spec_norm(&eval_y(&zv))?;
        mu *= 0.2;
    }
    Ok(eval_y(&zv))
}

/// Orthonormal basis of l⊥ (columns).
fn complement(l: &DVector<f64>) -> DMatrix<f64> {
    let r = l.len();
    let u = l / l.norm();
    // Householder reflector mapping e_0 to u; its other columns span u⊥
    let mut v = u.clone();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vn = v.norm_squared();
    let h = DMatrix::identity(r, r) - (&v * v.transpose()) * (2.0 / vn);
    h.columns(1, r - 1).into_owned()
}

/// Value, gradient and Hessian of f_μ(y) = μ log tr 2cosh(M/μ), M = Σ y_j B_j.
struct Smoothed {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Smoothed {
    fn value_only(m: &ComplexMatrix, mu: f64) -> Result<f64> {
        let lam = m.eigvalsh()?;
        let c = lam.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let s: f64 = lam
            .iter()
            .map(|l| ((l - c) / mu).exp() + ((-l - c) / mu).exp())
            .sum();
        Ok(c + mu * s.ln())
    }

    fn new(m: &ComplexMatrix, bs: &[ComplexMatrix], mu: f64) -> Result<Self> {
        let eig = m.eigh()?;
        let lam = &eig.values;
        let n = lam.len();
        let c = lam.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        // scaled by e^{−c/μ}: cosh → ch, sinh → sh
        let ch: Vec<f64> = lam
            .iter()
            .map(|l| 0.5 * (((l - c) / mu).exp() + ((-l - c) / mu).exp()))
            .collect();
        let sh: Vec<f64> = lam
            .iter()
            .map(|l| 0.5 * (((l - c) / mu).exp() - ((-l - c) / mu).exp()))
            .collect();
        let s: f64 = 2.0 * ch.iter().sum::<f64>();
        let value = c + mu * s.ln();
        let u = &eig.vectors;
        let ud = u.adjoint();
        // B_j in the eigenbasis of M
        let bh: Vec<ComplexMatrix> = par::map_slice(bs, |b| ud.matmul(b).matmul(u));
        let r = bs.len();
        // ∂S/∂y_j = (2/μ) Σ_i sh_i (B̂_j)_ii
        let ds: Vec<f64> = bh
            .iter()
            .map(|b| (2.0 / mu) * (0..n).map(|i| sh[i] * b[(i, i)].re).sum::<f64>())
            .collect();
        let grad = DVector::from_fn(r, |j, _| mu * ds[j] / s);
        // divided differences of h'(λ) = (2/μ) sinh(λ/μ), scaled
        let mut dd = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (lam[i], lam[j]);
                dd[i * n + j] = if (a - b).abs() > 1e-3 * mu {
                    (2.0 / mu) * (sh[i] - sh[j]) / (a - b)
                } else {
                    // 2cosh((a+b)/2μ)·sinh(x)/x / μ² with x = (a−b)/2μ
                    let x = (a - b) / (2.0 * mu);
                    let m2 = 0.5 * (a + b);
                    let chm = 0.5 * (((m2 - c) / mu).exp() + ((-m2 - c) / mu).exp());
                    let sinc = if x == 0.0 { 1.0 } else { x.sinh() / x };
                    (2.0 / (mu * mu)) * chm * sinc
                };
            }
        }
        let rows: Vec<Vec<f64>> = par::map_range(r, |p| {
            (0..r)
                .map(|q| {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            acc += dd[i * n + j] * (bh[p][(i, j)] * bh[q][(j, i)]).re;
                        }
                    }
                    acc
                })
                .collect()
        });
        let d2s = DMatrix::from_fn(r, r, |p, q| rows[p][q]);
        let hess = DMatrix::from_fn(r, r, |p, q| {
            mu * (d2s[(p, q)] / s - ds[p] * ds[q] / (s * s))
        });
        Ok(Self {
            value,
            grad,
            hess: (&hess + hess.transpose()) * 0.5,
        })
    }
}

/// Pairwise distances; symmetric with zero diagonal.
pub fn distance_matrix(
    triple: &SpectralTriple,
    states: &[PointState],
    degree: usize,
) -> Result<DMatrix<f64>> {
    if states.len() < 2 {
        return Err(Error::Precondition(
            "distance matrix needs at least two states".into(),
        ));
    }
    let n = states.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let vals = par::map_slice(&pairs, |&(i, j)| {
        if states[i] == states[j] {
            Ok(0.0)
        } else {
            connes_distance(triple, &states[i], &states[j], degree).map(|r| r.value)
        }
    });
    let mut out = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let v = v?;
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    Ok(out)
}

/// Values for degrees 1..=max, for monotonicity reports.
pub fn degree_history(
    triple: &SpectralTriple,
    phi: &PointState,
    psi: &PointState,
    max_degree: usize,
) -> Result<Vec<DistanceResult>> {
    (1..=max_degree.max(1))
        .map(|d| connes_distance(triple, phi, psi, d))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzBoundCheck {
    pub d_xy: f64,
    pub coordinate_gap: f64,
    pub c_upper: f64,
    pub satisfied: bool,
}

/// d(x,y) ≤ C_Y |a_α(x) − a_α(y)|.
///
/// C_Y is evaluated on `region` (default {x, y}, the smallest admissible
/// choice). The estimate needs Y to be a set on which the chart is
/// injective and which the distance sup can "see" as connected; for far
/// apart points pass a region containing a path between them.
pub fn lipschitz_bound_check(
    triple: &SpectralTriple,
    chart: &Chart,
    x: &str,
    y: &str,
    region: Option<&[String]>,
    degree: usize,
) -> Result<LipschitzBoundCheck> {
    let fib = triple.require_fibres()?;
    for l in [x, y] {
        fib.require(l)?;
        if !chart.domain.iter().any(|d| d == l) {
            return Err(Error::Precondition(format!(
                "`{l}` is outside the domain of chart `{}`",
                chart.label
            )));
        }
    }
    let coords = chart.coordinate_matrices(triple)?;
    let (ix, iy) = (fib.require(x)?, fib.require(y)?);
    let ax: Vec<C64> = coords.iter().map(|c| fib.point_values(c)[ix]).collect();
    let ay: Vec<C64> = coords.iter().map(|c| fib.point_values(c)[iy]).collect();
    let gap = ax
        .iter()
        .zip(&ay)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let default_region = [x.to_string(), y.to_string()];
    let region = region.unwrap_or(&default_region);
    for l in region {
        if !chart.domain.iter().any(|d| d == l) {
            return Err(Error::Precondition(format!(
                "region point `{l}` is outside the chart domain"
            )));
        }
    }
    let consts = crate::calculus::lipschitz_constants(triple, &coords, region)?;
    let d_xy = if x == y {
        0.0
    } else {
        connes_distance(
            triple,
            &PointState::Point(x.into()),
            &PointState::Point(y.into()),
            degree,
        )?
        .value
    };
    let satisfied = d_xy <= consts.c_upper * gap * (1.0 + 1e-9) + 1e-12;
    Ok(LipschitzBoundCheck {
        d_xy,
        coordinate_gap: gap,
        c_upper: consts.c_upper,
        satisfied,
    })
}
