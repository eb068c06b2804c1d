//! Dixmier-trace estimation and the spectral quantities built on it.
//!
//! The estimator works on eigenvalues. For a hermitian operator the sequence
//! s_n = (Σ_{k≤n} λ_k)/log n is formed with eigenvalues sorted by |λ|
//! (for positive operators these are the singular values); a general operator
//! is split into Re T and Im T and the two sequences are combined as
//! s(Re T) + i·s(Im T). The limit is extrapolated from the fit s_n ≈ c + b/log n
//! over windows n ≤ dim/2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, C64, ZERO};
use crate::triple::{represent_chain, HochschildChain, SpectralTriple};

/// Relative agreement the extrapolation windows must reach.
pub const WINDOW_TOL: f64 = 0.05;

/// Smallest dimension with meaningful asymptotics.
pub const MIN_DIM: usize = 8;

/// Grid of partial-sum lengths used for the extrapolation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Windowing {
    /// n = 2^j; the top three are fitted.
    Dyadic,
    /// n ≈ (3/2)^j; the top three are fitted.
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DixmierEstimate {
    /// Extrapolated limit c of s_n ≈ c + b/log n.
    pub value: C64,
    /// (n, s_n) for every window of the grid, ascending n.
    pub windows: Vec<(usize, C64)>,
    pub converged: bool,
    /// Largest disagreement between the limits extrapolated from the top
    /// three windows and from the two window triples just below.
    pub spread: f64,
    /// Scale the spread was compared against.
    pub scale: f64,
    pub tolerance: f64,
}

impl DixmierEstimate {
    fn zero() -> Self {
        Self {
            value: ZERO,
            windows: Vec::new(),
            converged: true,
            spread: 0.0,
            scale: 0.0,
            tolerance: WINDOW_TOL,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            value: self.value * lambda,
            windows: self.windows.iter().map(|&(n, s)| (n, s * lambda)).collect(),
            converged: self.converged,
            spread: self.spread * lambda.abs(),
            scale: self.scale * lambda.abs(),
            tolerance: self.tolerance,
        }
    }
}

/// Dixmier estimate of `t` on the dyadic grid.
pub fn dixmier_estimate(t: &ComplexMatrix) -> Result<DixmierEstimate> {
    dixmier_estimate_with(t, Windowing::Dyadic)
}

pub fn dixmier_estimate_with(t: &ComplexMatrix, windowing: Windowing) -> Result<DixmierEstimate> {
    if t.dim() < MIN_DIM {
        return Err(Error::Precondition(format!(
            "dimension {} too small for Dixmier asymptotics (need ≥ {MIN_DIM})",
            t.dim()
        )));
    }
    if t.is_zero() {
        return Ok(DixmierEstimate::zero());
    }
    let re = t.hermitian_part().eigvalsh()?;
    let skew = t.skew_part();
    let im = if skew.max_abs() == 0.0 {
        None
    } else {
        Some(skew.eigvalsh()?)
    };
    Ok(estimate_from_spectrum(&re, im.as_deref(), windowing))
}

/// Estimate from the eigenvalues of Re T (and optionally Im T).
pub fn estimate_from_spectrum(
    re: &[f64],
    im: Option<&[f64]>,
    windowing: Windowing,
) -> DixmierEstimate {
    let n = re.len();
    let sums_re = sorted_partial_sums(re);
    let sums_im = im.map(sorted_partial_sums);
    // the upper half of a truncated spectrum mostly reflects the cutoff
    let grid = window_grid((n / 2).max(2), windowing);
    let windows: Vec<(usize, C64)> = grid
        .iter()
        .map(|&m| {
            let l = (m as f64).ln();
            let r = sums_re[m - 1] / l;
            let i = sums_im.as_ref().map_or(0.0, |s| s[m - 1] / l);
            (m, c64(r, i))
        })
        .collect();
    // extrapolate from the top three windows, and from the two triples
    // below it; their disagreement measures how settled the limit is
    let len = windows.len();
    let fits: Vec<C64> = (0..3)
        .filter(|&k| len >= 3 + k || (k == 0 && len > 0))
        .map(|k| fit_limit(&windows[len.saturating_sub(3 + k)..len - k]))
        .collect();
    let value = fits[0];
    let mut spread: f64 = 0.0;
    for a in &fits {
        for b in &fits {
            spread = spread.max((a - b).norm());
        }
    }
    let abs_sum: f64 = re.iter().map(|x| x.abs()).sum::<f64>()
        + im.map_or(0.0, |v| v.iter().map(|x| x.abs()).sum::<f64>());
    let scale = value.norm().max(abs_sum / (n as f64).ln());
    let converged = spread <= WINDOW_TOL * scale || scale == 0.0;
    DixmierEstimate {
        value,
        windows,
        converged,
        spread,
        scale,
        tolerance: WINDOW_TOL,
    }
}

/// Partial sums of the values ordered by decreasing magnitude; ties keep
/// ascending value order so the result is deterministic.
fn sorted_partial_sums(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(a.total_cmp(b)));
    let mut acc = 0.0;
    s.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn window_grid(n: usize, windowing: Windowing) -> Vec<usize> {
    let mut grid = Vec::new();
    match windowing {
        Windowing::Dyadic => {
            let mut m = 2;
            while m <= n {
                grid.push(m);
                m *= 2;
            }
        }
        Windowing::Geometric => {
            let mut x = 2.0_f64;
            while x.round() as usize <= n {
                let m = x.round() as usize;
                if grid.last() != Some(&m) {
                    grid.push(m);
                }
                x *= 1.5;
            }
        }
    }
    grid
}

/// Least-squares c in s = c + b/log n, separately for real and imaginary parts.
fn fit_limit(points: &[(usize, C64)]) -> C64 {
    if points.len() == 1 {
        return points[0].1;
    }
    let xs: Vec<f64> = points.iter().map(|(m, _)| 1.0 / (*m as f64).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my: C64 = points.iter().map(|p| p.1).sum::<C64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: C64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - my) * (x - mx))
        .sum();
    let b = sxy / sxx;
    my - b * mx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricDimension {
    pub p_estimate: f64,
    pub p_rounded: usize,
    pub trace_at_p: DixmierEstimate,
    /// Number of (rank, eigenvalue) points used in the fit.
    pub fit_points: usize,
}

/// Metric dimension from the decay of μ_k(⟨D⟩⁻¹).
///
/// Each μ is mapped back to λ = (μ⁻² − 1)^{1/2} = |λ_D| so the constant
/// offset in ⟨D⟩ does not bend the log-log line, degenerate clusters are
/// placed at their mid rank, and log λ is fitted against log rank over
/// ranks dim/100 … dim/10. Then p = 1/slope.
pub fn metric_dimension(triple: &SpectralTriple) -> Result<MetricDimension> {
    let eig = triple.dirac_eigen()?;
    let dim = eig.values.len();
    let mut mags: Vec<f64> = eig.values.iter().map(|l| l.abs()).collect();
    mags.sort_by(f64::total_cmp);
    // mid ranks of clusters (1-based ranks)
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < dim {
        let mut j = i;
        while j + 1 < dim && (mags[j + 1] - mags[i]).abs() <= 1e-9 * mags[i].max(1e-300) {
            j += 1;
        }
        clusters.push((0.5 * ((i + 1) + (j + 1)) as f64, mags[i]));
        i = j + 1;
    }
    let distinct = clusters.iter().filter(|c| c.1 > 0.0).count();
    if distinct < 32 {
        return Err(Error::Precondition(format!(
            "D has only {distinct} distinct nonzero eigenvalue magnitudes (need ≥ 32)"
        )));
    }
    let lo = (dim as f64 / 100.0).max(1.0);
    let hi = dim as f64 / 10.0;
    let pts: Vec<(f64, f64)> = clusters
        .iter()
        .filter(|(r, l)| *r >= lo && *r <= hi && *l > 0.0)
        .map(|(r, l)| (r.ln(), l.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition(
            "too few eigenvalues in the fitting decade".into(),
        ));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !(slope.abs() > 1e-3) {
        return Err(Error::Precondition(
            "spectrum does not grow; no metric dimension".into(),
        ));
    }
    let p_estimate = 1.0 / slope;
    let p_rounded = p_estimate.round().max(1.0) as usize;
    let weights: Vec<f64> = eig
        .values
        .iter()
        .map(|l| (1.0 + l * l).powf(-(p_rounded as f64) / 2.0))
        .collect();
    let trace_at_p = estimate_from_spectrum(&weights, None, Windowing::Dyadic);
    Ok(MetricDimension {
        p_estimate,
        p_rounded,
        trace_at_p,
        fit_points: pts.len(),
    })
}

fn claimed_p(triple: &SpectralTriple) -> Result<usize> {
    triple
        .claimed_dimension()
        .ok_or_else(|| Error::Missing("triple has no claimed dimension".into()))
}

/// ⟨D⟩^{−p/2} X ⟨D⟩^{−p/2}, which has the same Dixmier trace as X⟨D⟩^{−p}
/// and stays hermitian when X is.
pub fn weighted(triple: &SpectralTriple, x: &ComplexMatrix, p: usize) -> Result<ComplexMatrix> {
    let w = triple.bracket_power(p as f64 / 2.0)?;
    Ok(w.matmul(x).matmul(&w))
}

/// μ_D(a) = ∮ a⟨D⟩^{−p}.
pub fn measure_functional(triple: &SpectralTriple, a: &ComplexMatrix) -> Result<DixmierEstimate> {
    measure_functional_with(triple, a, Windowing::Dyadic)
}

pub fn measure_functional_with(
    triple: &SpectralTriple,
    a: &ComplexMatrix,
    windowing: Windowing,
) -> Result<DixmierEstimate> {
    let p = claimed_p(triple)?;
    a.check_same_dim(triple.dirac())?;
    dixmier_estimate_with(&weighted(triple, a, p)?, windowing)
}

/// C_η(a⁰,…,a^m) = ∮ Γ π_D(η) a⁰[D,a¹]…[D,a^m] ⟨D⟩^{−p}, with deg η + m = p.
pub fn hochschild_cocycle(
    triple: &SpectralTriple,
    eta: &HochschildChain,
    args: &[ComplexMatrix],
) -> Result<DixmierEstimate> {
    let p = claimed_p(triple)?;
    if args.is_empty() || eta.degree() + args.len() - 1 != p {
        return Err(Error::Degree(format!(
            "degree {} chain with {} arguments does not match p = {p}",
            eta.degree(),
            args.len()
        )));
    }
    let mut x = triple
        .grading_or_identity()
        .matmul(&represent_chain(triple, eta)?);
    x = x.matmul(&args[0]);
    for a in &args[1..] {
        x = x.matmul(&triple.d(a));
    }
    dixmier_estimate(&weighted(triple, &x, p)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WodzickiCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub rel_error: f64,
    pub lhs_estimate: DixmierEstimate,
}

/// Volume of the unit sphere S^{p−1} ⊂ R^p.
pub fn unit_sphere_volume(p: usize) -> f64 {
    use std::f64::consts::PI;
    // 2π^{p/2}/Γ(p/2) by the recursion |S^{p-1}| = 2π/(p−2)·|S^{p-3}|
    match p {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (p as f64 - 2.0) * unit_sphere_volume(p - 2),
    }
}

/// Compares μ_D(a) with N·|S^{p−1}|/(p(2π)^p)·∫ a dvol.
pub fn wodzicki_crosscheck(triple: &SpectralTriple, a: &ComplexMatrix) -> Result<WodzickiCheck> {
    let p = claimed_p(triple)?;
    let n = triple.spinor_rank()? as f64;
    let integral = triple.integrate(a)?;
    let constant =
        n * unit_sphere_volume(p) / (p as f64 * (2.0 * std::f64::consts::PI).powi(p as i32));
    let rhs = integral * constant;
    let lhs_estimate = measure_functional(triple, a)?;
    let lhs = lhs_estimate.value;
    let diff = (lhs - rhs).norm();
    let rel_error = if rhs.norm() > 0.0 {
        diff / rhs.norm()
    } else {
        diff
    };
    Ok(WodzickiCheck {
        lhs,
        rhs,
        rel_error,
        lhs_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_diagonal_gives_one() {
        let t = ComplexMatrix::from_real_diagonal(
            &(1..=1024).map(|k| 1.0 / k as f64).collect::<Vec<_>>(),
        );
        let e = dixmier_estimate(&t).unwrap();
        assert!((e.value.re - 1.0).abs() < 0.03, "{e:?}");
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(dixmier_estimate(&ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn sphere_volumes() {
        assert_eq!(unit_sphere_volume(1), 2.0);
        assert!((unit_sphere_volume(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
