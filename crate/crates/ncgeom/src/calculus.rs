//! Functional calculi and the constructive corollaries built on them:
//! nearest projectors, partitions of unity, local inverses and Lipschitz
//! constants of chart coordinates.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, commutator, dmatrix_norm, ComplexMatrix, C64, ONE, ZERO};
use crate::par;
use crate::span::PointSpan;
use crate::triple::SpectralTriple;

type Eval = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
type Grad = Arc<dyn Fn(&[f64]) -> Vec<C64> + Send + Sync>;

/// A smooth function on a box in R^n, with an optional gradient.
#[derive(Clone)]
pub struct SmoothFunction {
    arity: usize,
    eval: Eval,
    gradient: Option<Grad>,
    support: Vec<(f64, f64)>,
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("arity", &self.arity)
            .field("has_gradient", &self.gradient.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl SmoothFunction {
    pub fn new(
        support: Vec<(f64, f64)>,
        eval: impl Fn(&[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            arity: support.len(),
            eval: Arc::new(eval),
            gradient: None,
            support,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<C64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(grad));
        self
    }

    /// Real-valued convenience constructor.
    pub fn real(
        support: Vec<(f64, f64)>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(support, move |x| c64(f(x), 0.0))
    }

    /// Isotropic gaussian exp(−|x − c|²/(2σ²)) with its gradient.
    pub fn gaussian(centre: Vec<f64>, sigma: f64, support: Vec<(f64, f64)>) -> Self {
        let c2 = centre.clone();
        let s2 = sigma * sigma;
        let value = move |x: &[f64]| -> f64 {
            let r2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum();
            (-r2 / (2.0 * s2)).exp()
        };
        let v2 = value.clone();
        Self::real(support, value).with_gradient(move |x| {
            let g = v2(x);
            x.iter()
                .zip(&c2)
                .map(|(a, b)| c64(-(a - b) / s2 * g, 0.0))
                .collect()
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<C64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// ∂_j f as a function on the same box.
    pub fn partial(&self, j: usize) -> Result<SmoothFunction> {
        let g = self
            .gradient
            .clone()
            .ok_or_else(|| Error::Precondition("function has no gradient evaluator".into()))?;
        Ok(SmoothFunction::new(self.support.clone(), move |x| g(x)[j]))
    }
}

/// f(a) for normal a via its eigendecomposition.
pub fn holomorphic_calc(
    f: impl Fn(C64) -> C64,
    a: &ComplexMatrix,
    tol: f64,
) -> Result<ComplexMatrix> {
    let ad = a.adjoint();
    let defect = (&a.matmul(&ad) - &ad.matmul(a)).max_abs();
    if defect > tol * a.max_abs().powi(2).max(1.0) {
        return Err(Error::Precondition(format!(
            "matrix is not normal (defect {defect:.3e})"
        )));
    }
    // the hermitian and skew parts commute; a generic real combination of
    // them has the joint eigenbasis
    let h = a.hermitian_part();
    let k = a.skew_part();
    let mut mix = h.clone();
    mix.add_scaled(c64(0.618_033_988_749_894_8, 0.0), &k);
    let eig = mix.eigh()?;
    let v = &eig.vectors;
    let n = a.dim();
    let av = a.matmul(v);
    let lambdas: Vec<C64> = (0..n)
        .map(|j| (0..n).map(|i| v[(i, j)].conj() * av[(i, j)]).sum())
        .collect();
    let fd: Vec<C64> = lambdas.into_iter().map(f).collect();
    Ok(v.matmul(&ComplexMatrix::from_diagonal(&fd))
        .matmul(&v.adjoint()))
}

/// Joint eigenvectors and the joint spectrum (one row per eigenvector) of
/// commuting hermitian matrices.
fn joint_spectrum(
    a_list: &[&ComplexMatrix],
    tol: f64,
) -> Result<(Option<ComplexMatrix>, Vec<Vec<f64>>)> {
    let n = a_list[0].dim();
    for a in a_list {
        a.check_same_dim(a_list[0])?;
        if a.hermitian_defect() > tol * a.max_abs().max(1.0) {
            return Err(Error::Precondition(
                "smooth calculus needs hermitian inputs".into(),
            ));
        }
    }
    for i in 0..a_list.len() {
        for j in i + 1..a_list.len() {
            let c = commutator(a_list[i], a_list[j])?.max_abs();
            let scale = a_list[i].max_abs() * a_list[j].max_abs();
            if c > tol * scale.max(1.0) {
                return Err(Error::Precondition(format!(
                    "inputs {i} and {j} do not commute (defect {c:.3e})"
                )));
            }
        }
    }
    if a_list.iter().all(|a| a.is_diagonal(0.0)) {
        let spec = (0..n)
            .map(|k| a_list.iter().map(|a| a[(k, k)].re).collect())
            .collect();
        return Ok((None, spec));
    }
    // incommensurate weights keep distinct joint eigenvalues apart
    let mut mix = ComplexMatrix::zeros(n);
    for (i, a) in a_list.iter().enumerate() {
        let w = 1.0 / (1.0 + i as f64 * 0.754_877_666_246_692_7);
        mix.add_scaled(c64(w, 0.0), &a.hermitian_part());
    }
    let eig = mix.eigh()?;
    let v = eig.vectors;
    let spec = par::map_range(n, |k| {
        a_list
            .iter()
            .map(|a| {
                (0..n)
                    .map(|i| {
                        let ai: C64 = (0..n).map(|j| a[(i, j)] * v[(j, k)]).sum();
                        v[(i, k)].conj() * ai
                    })
                    .sum::<C64>()
                    .re
            })
            .collect()
    });
    Ok((Some(v), spec))
}

fn from_joint(v: &Option<ComplexMatrix>, values: &[C64]) -> ComplexMatrix {
    let d = ComplexMatrix::from_diagonal(values);
    match v {
        None => d,
        Some(v) => v.matmul(&d).matmul(&v.adjoint()),
    }
}

/// f(a₁,…,a_n) for commuting hermitian matrices by simultaneous
/// diagonalization.
pub fn smooth_calc(
    f: &SmoothFunction,
    a_list: &[&ComplexMatrix],
    tol: f64,
) -> Result<ComplexMatrix> {
    if a_list.len() != f.arity() {
        return Err(Error::Precondition(format!(
            "function of {} variables applied to {} matrices",
            f.arity(),
            a_list.len()
        )));
    }
    let (v, spec) = joint_spectrum(a_list, tol)?;
    check_support(f, &spec, tol)?;
    let values: Vec<C64> = spec.iter().map(|x| f.eval(x)).collect();
    Ok(from_joint(&v, &values))
}

fn check_support(f: &SmoothFunction, spec: &[Vec<f64>], tol: f64) -> Result<()> {
    for x in spec {
        for (j, (&xj, &(lo, hi))) in x.iter().zip(f.support()).enumerate() {
            let slack = tol * (hi - lo).abs().max(1.0);
            if xj < lo - slack || xj > hi + slack {
                return Err(Error::Precondition(format!(
                    "joint spectrum value {xj} escapes the support box in variable {j}"
                )));
            }
        }
    }
    Ok(())
}

/// Quadrature settings for the Fourier-integral route.
#[derive(Clone, Copy, Debug)]
pub struct FourierQuadrature {
    /// Spatial samples per axis across the support box.
    pub samples: usize,
    /// Relative size of |f̂| below which the frequency box is truncated.
    pub tail: f64,
}

impl Default for FourierQuadrature {
    fn default() -> Self {
        Self {
            samples: 96,
            tail: 1e-10,
        }
    }
}

/// f(a₁,…,a_n) = (2π)^{−n} ∫ f̂(s) e^{i s·a} dⁿs, evaluated with the
/// trapezoid rule: f̂ is sampled on a frequency grid matched to the box,
/// the grid is cut where |f̂| drops below `tail`, and each e^{i s_j a_j}
/// comes from the one-variable holomorphic calculus.
///
/// Cross-check for [`smooth_calc`]; cost grows like samplesⁿ.
pub fn smooth_calc_fourier(
    f: &SmoothFunction,
    a_list: &[&ComplexMatrix],
    quad: FourierQuadrature,
    tol: f64,
) -> Result<ComplexMatrix> {
    let n = f.arity();
    if a_list.len() != n || n == 0 {
        return Err(Error::Precondition(
            "arity does not match the input list".into(),
        ));
    }
    let (_, spec) = joint_spectrum(a_list, tol)?;
    check_support(f, &spec, tol)?;
    let m = quad.samples.max(8);
    let sup = f.support();
    // box of width W sampled at m points; period 2W for the inverse sum
    let widths: Vec<f64> = sup.iter().map(|(lo, hi)| hi - lo).collect();
    let dx: Vec<f64> = widths.iter().map(|w| w / (m - 1) as f64).collect();
    let ds: Vec<f64> = widths.iter().map(|w| PI / w).collect();
    // frequencies k·ds for |k| ≤ K, with K·ds below the spatial Nyquist limit
    let kmax: Vec<usize> = (0..n)
        .map(|j| ((PI / dx[j]) / ds[j]).floor() as usize)
        .collect();

    let total: usize = m.pow(n as u32);
    let mut grid = vec![ZERO; total];
    for (idx, g) in grid.iter_mut().enumerate() {
        let x = unflatten(idx, m, n)
            .iter()
            .enumerate()
            .map(|(j, &i)| sup[j].0 + i as f64 * dx[j])
            .collect::<Vec<_>>();
        // trapezoid end weights
        let w: f64 = unflatten(idx, m, n)
            .iter()
            .map(|&i| if i == 0 || i == m - 1 { 0.5 } else { 1.0 })
            .product();
        *g = f.eval(&x) * w;
    }
    // separable forward transform, one axis at a time
    let mut shape: Vec<usize> = vec![m; n];
    let mut data = grid;
    for axis in 0..n {
        let nk = 2 * kmax[axis] + 1;
        let mut new_shape = shape.clone();
        new_shape[axis] = nk;
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = vec![ZERO; outer * nk * stride];
        for o in 0..outer {
            for k in 0..nk {
                let s = (k as f64 - kmax[axis] as f64) * ds[axis];
                for i in 0..shape[axis] {
                    let x = sup[axis].0 + i as f64 * dx[axis];
                    let e = C64::from_polar(dx[axis], -s * x);
                    for r in 0..stride {
                        out[(o * nk + k) * stride + r] +=
                            e * data[(o * shape[axis] + i) * stride + r];
                    }
                }
            }
        }
        data = out;
        shape = new_shape;
    }
    // truncate the frequency box where the transform has decayed
    let peak = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut keep = vec![0usize; n];
    for axis in 0..n {
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut last = 0;
        for k in 0..shape[axis] {
            let mut mx: f64 = 0.0;
            for o in 0..outer {
                for r in 0..stride {
                    mx = mx.max(data[(o * shape[axis] + k) * stride + r].norm());
                }
            }
            let dist = (k as isize - kmax[axis] as isize).unsigned_abs();
            if mx > quad.tail * peak {
                last = last.max(dist);
            }
        }
        keep[axis] = (last + 1).min(kmax[axis]);
    }
    // inverse: Σ_s f̂(s) Π_j e^{i s_j a_j} ds / (2π)^n, nested over axes
    let dim = a_list[0].dim();
    let eigs: Vec<_> = a_list.iter().map(|a| a.eigh()).collect::<Result<_>>()?;
    let exp_of =
        |axis: usize, s: f64| -> ComplexMatrix { eigs[axis].map(|l| C64::from_polar(1.0, s * l)) };
    let scale: f64 = ds.iter().product::<f64>() / (2.0 * PI).powi(n as i32);
    // flattened index = ((k0·n1 + k1)·n2 + k2)…
    let acc = nest_flat(n, &shape, &kmax, &keep, &ds, &data, dim, &exp_of);
    Ok(acc.scale_real(scale))
}

#[allow(clippy::too_many_arguments)]
fn nest_flat(
    n: usize,
    shape: &[usize],
    kmax: &[usize],
    keep: &[usize],
    ds: &[f64],
    data: &[C64],
    dim: usize,
    exp_of: &dyn Fn(usize, f64) -> ComplexMatrix,
) -> ComplexMatrix {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        axis: usize,
        prefix: usize,
        n: usize,
        shape: &[usize],
        kmax: &[usize],
        keep: &[usize],
        ds: &[f64],
        data: &[C64],
        dim: usize,
        exp_of: &dyn Fn(usize, f64) -> ComplexMatrix,
    ) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(dim);
        for k in kmax[axis] - keep[axis]..=kmax[axis] + keep[axis] {
            let s = (k as f64 - kmax[axis] as f64) * ds[axis];
            let e = exp_of(axis, s);
            let idx = prefix * shape[axis] + k;
            if axis + 1 == n {
                acc.add_scaled(data[idx], &e);
            } else {
                let inner = rec(axis + 1, idx, n, shape, kmax, keep, ds, data, dim, exp_of);
                acc = &acc + &e.matmul(&inner);
            }
        }
        acc
    }
    rec(0, 0, n, shape, kmax, keep, ds, data, dim, exp_of)
}

fn unflatten(mut idx: usize, m: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for j in (0..n).rev() {
        out[j] = idx % m;
        idx /= m;
    }
    out
}

#[derive(Clone, Debug)]
pub struct CommutatorExpansion {
    /// Σ_j ∂_j f(a)·[D, a_j]
    pub expansion: ComplexMatrix,
    /// ‖expansion − [D, f(a)]‖
    pub residual: f64,
}

/// The first-order expansion [D, f(a)] = Σ_j ∂_j f(a)[D, a_j] and its defect.
pub fn commutator_expansion(
    triple: &SpectralTriple,
    f: &SmoothFunction,
    a_list: &[&ComplexMatrix],
    tol: f64,
) -> Result<CommutatorExpansion> {
    if !f.has_gradient() {
        return Err(Error::Precondition(
            "function has no gradient evaluator".into(),
        ));
    }
    let mut expansion = ComplexMatrix::zeros(triple.dim());
    for (j, a) in a_list.iter().enumerate() {
        let dj = smooth_calc(&f.partial(j)?, a_list, tol)?;
        expansion = &expansion + &dj.matmul(&triple.d(a));
    }
    let direct = triple.d(&smooth_calc(f, a_list, tol)?);
    let residual = (&expansion - &direct).operator_norm();
    Ok(CommutatorExpansion {
        expansion,
        residual,
    })
}

#[derive(Clone, Debug)]
pub struct NearestProjector {
    pub q: ComplexMatrix,
    /// ‖q − b‖, at most `eps` by construction.
    pub distance: f64,
}

/// Projector near a hermitian b whose spectrum lies within `eps` of {0, 1}.
///
/// e is the spectral projector of b onto (1/2, ∞); then
/// q = ee*(ee* + (1 − e*)(1 − e))⁻¹, which equals e for hermitian b but is
/// kept in the general form.
pub fn nearest_projector(b: &ComplexMatrix, eps: f64) -> Result<NearestProjector> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Precondition("eps must lie in (0, 1/2)".into()));
    }
    if b.hermitian_defect() > 1e-10 * b.max_abs().max(1.0) {
        return Err(Error::Precondition(
            "nearest_projector needs a hermitian input".into(),
        ));
    }
    let eig = b.eigh()?;
    if let Some(l) = eig.values.iter().find(|&&l| (l - 0.5).abs() <= 0.5 - eps) {
        return Err(Error::Precondition(format!(
            "eigenvalue {l:.4} lies in the band around 1/2; no spectral gap"
        )));
    }
    let e = eig.map(|l| if l > 0.5 { ONE } else { ZERO });
    let n = b.dim();
    let id = ComplexMatrix::identity(n);
    let ee = e.matmul(&e.adjoint());
    let one_e = &id - &e;
    let denom = &ee + &one_e.adjoint().matmul(&one_e);
    let mut q = ee.matmul(&denom.inverse()?);
    // remove rounding asymmetry
    q = q.hermitian_part();
    let distance = (&q - b).operator_norm();
    Ok(NearestProjector { q, distance })
}

/// An open box in coordinate space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverBox {
    pub name: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Finite open cover of the sample points by coordinate boxes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSpec {
    pub boxes: Vec<CoverBox>,
    /// Period of each coordinate, if it is an angle.
    pub periods: Vec<Option<f64>>,
}

impl CoverSpec {
    /// Smooth bump, positive exactly inside the box.
    fn bump(&self, b: &CoverBox, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for j in 0..x.len() {
            let (lo, hi) = (b.lo[j], b.hi[j]);
            let mut t = x[j];
            if let Some(Some(p)) = self.periods.get(j) {
                // bring t into [lo, lo + p)
                t = lo + (t - lo).rem_euclid(*p);
            }
            if t <= lo || t >= hi {
                return 0.0;
            }
            let u = (2.0 * t - lo - hi) / (hi - lo);
            v *= (1.0 - 1.0 / (1.0 - u * u)).exp();
        }
        v
    }
}

/// Smoothstep of order 2 (C² at both ends) on [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// 0 below ε, 1 above 1 − ε, smooth and increasing between.
pub fn cutoff(t: f64, eps: f64) -> f64 {
    smoothstep((t - eps) / (1.0 - 2.0 * eps))
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub functions: Vec<ComplexMatrix>,
    /// Degree of generator monomials used in the approximation step.
    pub degree: usize,
    /// Largest entrywise error of the approximated projector field.
    pub fit_error: f64,
}

/// Smooth partition of unity subordinate to `cover`.
///
/// Follows the classical construction: continuous bumps φ̃_α, the pointwise
/// projector p with entries (φ̃_αφ̃_β)^{1/2}, its approximation in the span of
/// generator monomials (degree raised until the fit is within 1/(8n)), the
/// nearest projector q at each point, ψ_α = q_αα, then g(ψ_α) with the cutoff
/// g at ε = 1/(4n), and normalization.
pub fn partition_of_unity(triple: &SpectralTriple, cover: &CoverSpec) -> Result<PartitionOfUnity> {
    if !triple.is_commutative() {
        return Err(Error::Precondition(
            "partition of unity needs a commutative algebra".into(),
        ));
    }
    let fib = triple.require_fibres()?;
    let n = cover.boxes.len();
    if n == 0 {
        return Err(Error::Precondition("empty cover".into()));
    }
    let pts = fib.points();
    let bumps: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            cover
                .boxes
                .iter()
                .map(|b| cover.bump(b, &p.coords))
                .collect()
        })
        .collect();
    for (x, b) in bumps.iter().enumerate() {
        if b.iter().all(|&v| v == 0.0) {
            return Err(Error::Precondition(format!(
                "cover misses point `{}`",
                pts[x].label
            )));
        }
    }
    // p_{αβ}(x) = b_α b_β / Σ b²
    let target: Vec<Vec<f64>> = bumps
        .iter()
        .map(|b| {
            let s: f64 = b.iter().map(|v| v * v).sum();
            let mut m = vec![0.0; n * n];
            for a in 0..n {
                for c in 0..n {
                    m[a * n + c] = b[a] * b[c] / s;
                }
            }
            m
        })
        .collect();
    let gen_values: Vec<Vec<C64>> = triple
        .generators()
        .iter()
        .map(|(_, g)| fib.point_values(g))
        .collect();
    let accuracy = 1.0 / (8.0 * n as f64);
    let mut degree = 2;
    let (fitted, fit_error) = loop {
        let span = PointSpan::new(&gen_values, degree);
        let mut fitted = vec![vec![0.0; n * n]; pts.len()];
        let mut worst: f64 = 0.0;
        for e in 0..n * n {
            let col: Vec<C64> = target.iter().map(|m| c64(m[e], 0.0)).collect();
            let fit = span.project(&col);
            for x in 0..pts.len() {
                fitted[x][e] = fit[x].re;
                worst = worst.max((fit[x].re - target[x][e]).abs());
            }
        }
        if worst <= accuracy || span.dim() >= pts.len() || degree >= 64 {
            break (fitted, worst);
        }
        degree += 2;
    };
    let eps = 1.0 / (4.0 * n as f64);
    // per point: nearest projector, diagonal, cutoff
    let chis: Vec<Result<Vec<f64>>> = par::map_range(pts.len(), |x| {
        let m = ComplexMatrix::from_fn(n, |a, c| {
            c64(0.5 * (fitted[x][a * n + c] + fitted[x][c * n + a]), 0.0)
        });
        let q = nearest_projector(&m, 1.0 / (3.0 * n as f64)).map_err(|e| {
            Error::Numerical(format!("projector step failed at `{}`: {e}", pts[x].label))
        })?;
        Ok((0..n).map(|a| cutoff(q.q[(a, a)].re, eps)).collect())
    });
    let chis: Vec<Vec<f64>> = chis.into_iter().collect::<Result<_>>()?;
    let mut phis = vec![vec![0.0; pts.len()]; n];
    for (x, chi) in chis.iter().enumerate() {
        let s: f64 = chi.iter().sum();
        if s <= 0.0 {
            return Err(Error::Numerical(format!(
                "all cutoffs vanish at `{}`",
                pts[x].label
            )));
        }
        for a in 0..n {
            phis[a][x] = chi[a] / s;
        }
    }
    Ok(PartitionOfUnity {
        functions: phis.iter().map(|v| fib.real_function(v)).collect(),
        degree,
        fit_error,
    })
}

/// a·h⁻¹ on a region where h is invertible.
///
/// a and h must be fibre-local (h may carry full N×N blocks). h is first
/// replaced by h̃ = h + (ε/2)φ + ψ, where ε = min σ_min(h(x)) over supp a,
/// φ vanishes on supp a and equals 1 off V = region ∩ {σ_min(h) > ε/2}, and
/// ψ is a coordinate bump placed on any remaining singular points, away
/// from V. Then a·h̃⁻¹ agrees with a(x)h(x)⁻¹ on the region and vanishes
/// where a does.
pub fn local_inverse(
    triple: &SpectralTriple,
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    region: &[String],
    tol: f64,
) -> Result<ComplexMatrix> {
    let fib = triple.require_fibres()?;
    for (name, m) in [("a", a), ("h", h)] {
        m.check_same_dim(triple.dirac())?;
        let off = fib.off_fibre_defect(m);
        if off > tol * m.max_abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "{name} is not fibre-local (defect {off:.3e})"
            )));
        }
    }
    let npts = fib.len();
    let in_region: Vec<bool> = {
        let mut v = vec![false; npts];
        for l in region {
            v[fib.require(l)?] = true;
        }
        v
    };
    let a_blocks: Vec<DMatrix<C64>> = (0..npts).map(|x| fib.diagonal_block(a, x)).collect();
    let h_blocks: Vec<DMatrix<C64>> = (0..npts).map(|x| fib.diagonal_block(h, x)).collect();
    let supp: Vec<bool> = a_blocks.iter().map(|b| dmatrix_norm(b) > tol).collect();
    for x in 0..npts {
        if supp[x] && !in_region[x] {
            return Err(Error::Precondition(format!(
                "a is not supported in the region (nonzero at `{}`)",
                fib.points()[x].label
            )));
        }
    }
    let smin = |b: &DMatrix<C64>| -> f64 { b.singular_values().min() };
    let h_min: Vec<f64> = h_blocks.iter().map(smin).collect();
    for x in 0..npts {
        if in_region[x] && h_min[x] <= tol {
            return Err(Error::Precondition(format!(
                "h vanishes inside the region at `{}`",
                fib.points()[x].label
            )));
        }
    }
    if !supp.iter().any(|&s| s) {
        return Ok(ComplexMatrix::zeros(triple.dim()));
    }
    let eps = (0..npts)
        .filter(|&x| supp[x])
        .map(|x| h_min[x])
        .fold(f64::INFINITY, f64::min);
    let in_v: Vec<bool> = (0..npts)
        .map(|x| in_region[x] && h_min[x] > eps / 2.0)
        .collect();
    let coords: Vec<&[f64]> = fib.points().iter().map(|p| p.coords.as_slice()).collect();
    let dist = |x: usize, set: &dyn Fn(usize) -> bool| -> f64 {
        (0..npts)
            .filter(|&y| set(y))
            .map(|y| euclid(coords[x], coords[y]))
            .fold(f64::INFINITY, f64::min)
    };
    let phi: Vec<f64> = (0..npts)
        .map(|x| {
            if supp[x] {
                0.0
            } else if !in_v[x] {
                1.0
            } else {
                let da = dist(x, &|y| supp[y]);
                let dv = dist(x, &|y| !in_v[y]);
                if dv.is_infinite() {
                    smoothstep((da / (da + 1.0)).min(1.0))
                } else {
                    smoothstep(da / (da + dv))
                }
            }
        })
        .collect();
    let mut ht: Vec<DMatrix<C64>> = (0..npts)
        .map(|x| {
            let k = h_blocks[x].nrows();
            &h_blocks[x] + DMatrix::<C64>::identity(k, k) * c64(eps / 2.0 * phi[x], 0.0)
        })
        .collect();
    // bumps at the remaining singular points, all outside V
    for _round in 0..8 {
        let bad: Vec<usize> = (0..npts).filter(|&x| smin(&ht[x]) <= tol).collect();
        if bad.is_empty() {
            break;
        }
        for &b in &bad {
            let r = 0.5 * dist(b, &|y| in_v[y]);
            let amp = 1.0 + dmatrix_norm(&ht[b]) + eps;
            for x in 0..npts {
                if in_v[x] {
                    continue;
                }
                let d = euclid(coords[x], coords[b]);
                let w = if r.is_finite() && r > 0.0 {
                    1.0 - smoothstep(d / r)
                } else if x == b {
                    1.0
                } else {
                    0.0
                };
                if w > 0.0 {
                    let k = ht[x].nrows();
                    ht[x] += DMatrix::<C64>::identity(k, k) * c64(amp * w, 0.0);
                }
            }
        }
    }
    let mut blocks = Vec::with_capacity(npts);
    for x in 0..npts {
        let inv = ht[x].clone().try_inverse().ok_or_else(|| {
            Error::Numerical(format!(
                "could not regularize h at `{}`",
                fib.points()[x].label
            ))
        })?;
        blocks.push(&a_blocks[x] * inv);
    }
    Ok(fib.block_diagonal(&blocks))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzConstants {
    pub c_lower: f64,
    pub c_upper: f64,
}

/// Symbols σ_x([D, a^j]) of chart coordinates at every point.
pub fn coordinate_symbols(
    triple: &SpectralTriple,
    coords: &[ComplexMatrix],
) -> Vec<Vec<DMatrix<C64>>> {
    let fib = triple.fibres().expect("caller checked fibres");
    let ds: Vec<ComplexMatrix> = coords.iter().map(|c| triple.d(c)).collect();
    ds.iter().map(|d| fib.symbols(d)).collect()
}

/// Pointwise Gram matrix g^{jk}(x) = −(1/N) tr(σ_x(da^j)σ_x(da^k)), symmetrized.
pub fn gram_at(symbols: &[Vec<DMatrix<C64>>], x: usize) -> DMatrix<f64> {
    let p = symbols.len();
    let n = symbols[0][x].nrows() as f64;
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in 0..p {
            g[(j, k)] = -(&symbols[j][x] * &symbols[k][x]).trace().re / n;
        }
    }
    (&g + g.transpose()) * 0.5
}

/// Constants of the two-sided Lipschitz estimate
/// C′‖[D,a]‖ ≤ ‖df‖_∞ ≤ C_Y‖[D,a]‖ for a = f(a¹,…,a^m) on the region Y.
///
/// Norms of one-forms are endomorphism norms sup_x‖σ_x(·)‖. C′ is
/// 1/Σ_j ‖[D,a^j]‖ and C_Y = max_i sup_{x∈Y} B_i(x) with
/// B_i(x) = m Σ_j |g_{ij}(x)| ‖σ_x(da^j)‖, g_{ij} the (pseudo-)inverse Gram.
pub fn lipschitz_constants(
    triple: &SpectralTriple,
    coords: &[ComplexMatrix],
    region: &[String],
) -> Result<LipschitzConstants> {
    let fib = triple.require_fibres()?;
    if coords.is_empty() {
        return Err(Error::Precondition("chart has no coordinates".into()));
    }
    let xs: Vec<usize> = region
        .iter()
        .map(|l| fib.require(l))
        .collect::<Result<_>>()?;
    if xs.is_empty() {
        return Err(Error::Precondition("empty region".into()));
    }
    let sym = coordinate_symbols(triple, coords);
    let m = coords.len();
    let sup_norms: Vec<f64> = sym
        .iter()
        .map(|s| s.iter().map(dmatrix_norm).fold(0.0, f64::max))
        .collect();
    let total: f64 = sup_norms.iter().sum();
    if total <= 0.0 {
        return Err(Error::Precondition(
            "chart coordinates have vanishing differentials".into(),
        ));
    }
    let c_lower = 1.0 / total;
    let mut c_upper: f64 = 0.0;
    for &x in &xs {
        let g = gram_at(&sym, x);
        let ginv = pseudo_inverse_checked(&g).ok_or_else(|| {
            Error::Precondition(format!(
                "Gram matrix singular at `{}`",
                fib.points()[x].label
            ))
        })?;
        for i in 0..m {
            let b: f64 = (0..m)
                .map(|j| ginv[(i, j)].abs() * dmatrix_norm(&sym[j][x]))
                .sum::<f64>()
                * m as f64;
            c_upper = c_upper.max(b);
        }
    }
    Ok(LipschitzConstants { c_lower, c_upper })
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix; None when the
/// matrix vanishes.
pub fn pseudo_inverse_checked(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let scale = g.amax();
    if !(scale > 0.0) {
        return None;
    }
    g.clone().pseudo_inverse(1e-10 * scale).ok()
}
