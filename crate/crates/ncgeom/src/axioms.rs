//! One checker per structural condition, each returning a verdict with a
//! numeric residual, and the consolidated report.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::connes_distance;
use crate::dixmier::{dixmier_estimate, measure_functional, metric_dimension, weighted};
use crate::error::{Error, Result};
use crate::linalg::{c64, commutator, ComplexMatrix, C64, ZERO};
use crate::span::monomials;
use crate::triple::{
    delta_derivation, hochschild_boundary, represent_chain, Mask, PointState, SpectralTriple,
};

/// Floor added to normalizing scales.
pub const SCALE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    /// Reported but deliberately not evaluated.
    NotEvaluated,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomVerdict {
    pub condition: String,
    pub status: Status,
    /// NaN (serialized as null) when the check could not run.
    pub residual: f64,
    pub tolerance: f64,
    pub details: String,
    /// Named auxiliary numbers (signs, counts, seminorms).
    pub metrics: BTreeMap<String, f64>,
}

impl AxiomVerdict {
    /// Pass iff residual ≤ tolerance.
    pub fn new(condition: &str, residual: f64, tolerance: f64, details: impl Into<String>) -> Self {
        let status = if residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            condition: condition.into(),
            status,
            residual,
            tolerance,
            details: details.into(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn inconclusive(condition: &str, tolerance: f64, details: impl Into<String>) -> Self {
        Self {
            condition: condition.into(),
            status: Status::Inconclusive,
            residual: f64::NAN,
            tolerance,
            details: details.into(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn not_evaluated(condition: &str, details: impl Into<String>) -> Self {
        Self {
            status: Status::NotEvaluated,
            ..Self::inconclusive(condition, f64::NAN, details)
        }
    }

    pub fn with_metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub triple: String,
    pub fingerprint: String,
    pub seed: u64,
    pub verdicts: Vec<AxiomVerdict>,
}

impl AxiomReport {
    pub fn verdict(&self, condition: &str) -> Option<&AxiomVerdict> {
        self.verdicts.iter().find(|v| v.condition == condition)
    }

    pub fn any_failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == Status::Fail)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.verdicts
            .iter()
            .any(|v| v.status == Status::Inconclusive)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckConfig {
    pub tol: f64,
    pub mask_width: usize,
    pub seed: u64,
    pub samples: usize,
    pub regularity_order: usize,
    /// Monomial degree for kernel computations (connectivity, metric).
    pub span_degree: usize,
    /// Tolerance on Dixmier-type estimates (closedness).
    pub dixmier_tol: f64,
    /// Allowed |p_estimate − claimed p|.
    pub dimension_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mask_width: 2,
            seed: 0,
            samples: 8,
            regularity_order: 3,
            span_degree: 2,
            dixmier_tol: 0.05,
            dimension_tol: 0.25,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Residual norm of an operator identity: symbol norm on fibre models,
/// masked operator norm otherwise.
fn local_norm(triple: &SpectralTriple, mask: &Mask, t: &ComplexMatrix) -> f64 {
    match triple.fibres() {
        Some(f) => f.endomorphism_norm(t),
        None => mask.norm(t),
    }
}

/// Dimension: the metric dimension matches the claimed p and
/// ∮⟨D⟩^{−p} is positive.
pub fn check_dimension(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    let name = "dimension";
    let Some(p) = triple.claimed_dimension() else {
        return AxiomVerdict::inconclusive(name, tol, "no claimed dimension");
    };
    match metric_dimension(triple) {
        Err(e) => AxiomVerdict::inconclusive(name, tol, e.to_string()),
        Ok(md) => {
            let res = (md.p_estimate - p as f64).abs();
            let trace = md.trace_at_p.value.re;
            let mut v = AxiomVerdict::new(
                name,
                res,
                tol,
                format!("p estimate {:.4}, trace at p {:.4}", md.p_estimate, trace),
            )
            .with_metric("p_estimate", md.p_estimate)
            .with_metric("trace_at_p", trace);
            if v.passed() && !(trace > 0.0) {
                v.status = Status::Fail;
                v.details.push_str("; trace at p is not positive");
            }
            v
        }
    }
}

/// First order: max over generator pairs of ‖[[D,a],b]‖/(‖[D,a]‖‖b‖).
pub fn check_first_order(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    check_first_order_masked(triple, tol, 2)
}

pub fn check_first_order_masked(triple: &SpectralTriple, tol: f64, width: usize) -> AxiomVerdict {
    let name = "first_order";
    let gens = triple.generators();
    if gens.len() < 2 {
        return AxiomVerdict::inconclusive(name, tol, "needs at least two generators");
    }
    let mask = triple.interior_mask(width);
    let mut worst: f64 = 0.0;
    let mut arg = (0, 0);
    for (i, (_, a)) in gens.iter().enumerate() {
        let da = triple.d(a);
        let na = da.operator_norm();
        for (j, (_, b)) in gens.iter().enumerate() {
            let r = mask.norm(&commutator(&da, b).expect("same dim"))
                / (na * b.operator_norm() + SCALE_FLOOR);
            if r > worst {
                worst = r;
                arg = (i, j);
            }
        }
    }
    AxiomVerdict::new(
        name,
        worst,
        tol,
        format!("worst pair ({}, {})", gens[arg.0].0, gens[arg.1].0),
    )
}

/// Regularity: seminorms q_m(a) = ‖δ^m(a)‖ and q′_m(a) = ‖δ^m([D,a])‖.
///
/// Always finite in finite dimensions; the largest growth ratio
/// q_{m+1}/q_m is reported as a refinement heuristic.
pub fn check_regularity(triple: &SpectralTriple, k: usize) -> AxiomVerdict {
    check_regularity_masked(triple, k, 2)
}

pub fn check_regularity_masked(triple: &SpectralTriple, k: usize, width: usize) -> AxiomVerdict {
    let name = "regularity";
    if k == 0 {
        return AxiomVerdict::inconclusive(name, 0.0, "order must be at least 1");
    }
    let mask = triple.interior_mask(width);
    let mut v = AxiomVerdict::new(name, 0.0, 0.0, "");
    let mut finite = true;
    let mut growth: f64 = 0.0;
    for (gname, a) in triple.generators() {
        for (tag, start) in [("q", a.clone()), ("q'", triple.d(a))] {
            let mut t = start;
            let mut prev = mask.norm(&t);
            v.metrics.insert(format!("{tag}_0({gname})"), prev);
            for m in 1..=k {
                t = match delta_derivation(triple, &t) {
                    Ok(t) => t,
                    Err(e) => return AxiomVerdict::inconclusive(name, 0.0, e.to_string()),
                };
                let q = mask.norm(&t);
                finite &= q.is_finite();
                if prev > 1e-12 {
                    growth = growth.max(q / prev);
                }
                v.metrics.insert(format!("{tag}_{m}({gname})"), q);
                prev = q;
            }
        }
    }
    v.residual = if finite { 0.0 } else { f64::INFINITY };
    v.status = if finite { Status::Pass } else { Status::Fail };
    v.details = format!("seminorms up to order {k}; max growth ratio {growth:.4}");
    v.with_metric("max_growth", growth)
}

/// Orientability: max(‖π_D(b(c))‖, ‖π_D(c) − Γ‖).
///
/// On fibre models the norms are pointwise (symbol) norms; truncated
/// spectral models use the interior mask.
pub fn check_orientability(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    check_orientability_masked(triple, tol, 2)
}

pub fn check_orientability_masked(triple: &SpectralTriple, tol: f64, width: usize) -> AxiomVerdict {
    let name = "orientability";
    let Some(c) = triple.cycle() else {
        return AxiomVerdict::inconclusive(name, tol, "no Hochschild cycle");
    };
    let p = triple.claimed_dimension().unwrap_or(c.degree());
    if c.degree() != p {
        return AxiomVerdict::inconclusive(
            name,
            tol,
            format!("cycle degree {} differs from p = {p}", c.degree()),
        );
    }
    let even = p.is_multiple_of(2);
    if even != triple.grading().is_some() {
        return AxiomVerdict::inconclusive(
            name,
            tol,
            "a grading must be present exactly when p is even",
        );
    }
    let run = || -> Result<(f64, f64)> {
        let mask = triple.interior_mask(width);
        let pic = represent_chain(triple, c)?;
        let gamma = triple.grading_or_identity();
        let dev = local_norm(triple, &mask, &(&pic - &gamma));
        let bnd = if p == 0 {
            0.0
        } else {
            local_norm(
                triple,
                &mask,
                &represent_chain(triple, &hochschild_boundary(c, triple)?)?,
            )
        };
        Ok((dev, bnd))
    };
    match run() {
        Err(e) => AxiomVerdict::inconclusive(name, tol, e.to_string()),
        Ok((dev, bnd)) => AxiomVerdict::new(
            name,
            dev.max(bnd),
            tol,
            format!("‖π_D(c) − Γ‖ = {dev:.3e}, ‖π_D(b c)‖ = {bnd:.3e}"),
        )
        .with_metric("representation_defect", dev)
        .with_metric("boundary", bnd),
    }
}

/// p-tuples of generator indices: all of them when few, else a seeded sample.
fn tuples(ngen: usize, p: usize, samples: usize, seed: u64) -> Vec<Vec<usize>> {
    let total = (ngen as f64).powi(p as i32);
    if total <= samples.max(1) as f64 {
        let mut out = vec![Vec::new()];
        for _ in 0..p {
            out = out
                .into_iter()
                .flat_map(|w: Vec<usize>| {
                    (0..ngen).map(move |g| {
                        let mut v = w.clone();
                        v.push(g);
                        v
                    })
                })
                .collect();
        }
        out
    } else {
        let mut r = rng(seed);
        (0..samples)
            .map(|_| (0..p).map(|_| r.random_range(0..ngen)).collect())
            .collect()
    }
}

/// Closedness: ∮ Γ[D,a₁]…[D,a_p]⟨D⟩^{−p} = 0 on sampled generator tuples.
pub fn check_closedness(
    triple: &SpectralTriple,
    tol: f64,
    samples: usize,
    seed: u64,
) -> AxiomVerdict {
    let name = "closedness";
    let Some(p) = triple.claimed_dimension() else {
        return AxiomVerdict::inconclusive(name, tol, "no claimed dimension");
    };
    let gens = triple.generators();
    if gens.is_empty() || p == 0 {
        return AxiomVerdict::inconclusive(name, tol, "nothing to sample");
    }
    if triple.dirac().is_zero() {
        return AxiomVerdict::inconclusive(
            name,
            tol,
            "D = 0: ⟨D⟩^{−p} is not trace-class dominated",
        );
    }
    let gamma = triple.grading_or_identity();
    let mut worst: f64 = 0.0;
    let mut unconverged = 0;
    let ts = tuples(gens.len(), p, samples, seed);
    for t in &ts {
        let mut x = gamma.clone().into_owned();
        for &g in t {
            x = x.matmul(&triple.d(&gens[g].1));
        }
        match weighted(triple, &x, p).and_then(|w| dixmier_estimate(&w)) {
            Err(e) => return AxiomVerdict::inconclusive(name, tol, e.to_string()),
            Ok(est) => {
                worst = worst.max(est.value.norm());
                if !est.converged {
                    unconverged += 1;
                }
            }
        }
    }
    if unconverged > 0 {
        let mut v = AxiomVerdict::inconclusive(
            name,
            tol,
            format!(
                "{unconverged} of {} estimates did not converge (max |estimate| {worst:.3e})",
                ts.len()
            ),
        );
        v.residual = worst;
        return v;
    }
    AxiomVerdict::new(
        name,
        worst,
        tol,
        format!("{} tuples, max |estimate| {worst:.3e}", ts.len()),
    )
}

/// KO sign rows by p mod 8: (J², JDJ⁻¹, JΓJ⁻¹ for even p).
const KO_SIGNS: [(i8, i8, i8); 8] = [
    (1, 1, 1),
    (1, -1, 0),
    (-1, 1, -1),
    (-1, 1, 0),
    (-1, 1, 1),
    (-1, -1, 0),
    (1, 1, -1),
    (1, 1, 0),
];

/// Rows p mod 8 of the sign table compatible with measured signs.
pub fn compatible_rows(j2: i8, jd: i8, jg: Option<i8>) -> Vec<usize> {
    (0..8)
        .filter(|&n| {
            let (a, b, c) = KO_SIGNS[n];
            a == j2
                && b == jd
                && match jg {
                    Some(s) => n % 2 == 0 && c == s,
                    None => n % 2 == 1,
                }
        })
        .collect()
}

/// Closest sign s with X′ ≈ sX, and the relative residual.
fn sign_of(xp: &ComplexMatrix, x: &ComplexMatrix) -> (i8, f64) {
    let scale = x.operator_norm() + SCALE_FLOOR;
    let plus = (xp - x).operator_norm() / scale;
    let minus = (xp + x).operator_norm() / scale;
    if plus <= minus {
        (1, plus)
    } else {
        (-1, minus)
    }
}

/// Reality: J antiunitary, Ja*J⁻¹ = a, and the sign table.
pub fn check_reality(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    let name = "reality";
    let Some(j) = triple.real_structure() else {
        return AxiomVerdict::inconclusive(name, tol, "no real structure");
    };
    let m = &j.matrix;
    let n = m.dim();
    // J T J⁻¹ = M conj(T) M† (antilinear) or M T M† (linear)
    let conjugate = |t: &ComplexMatrix| -> ComplexMatrix {
        let inner = if j.conjugates { t.conj() } else { t.clone() };
        m.matmul(&inner).matmul(&m.adjoint())
    };
    let unitary = (&m.matmul(&m.adjoint()) - &ComplexMatrix::identity(n)).operator_norm();
    let mut invol: f64 = 0.0;
    for (_, a) in triple.generators() {
        let r = (&conjugate(&a.adjoint()) - a).operator_norm() / (a.operator_norm() + SCALE_FLOOR);
        invol = invol.max(r);
    }
    let j2 = if j.conjugates {
        m.matmul(&m.conj())
    } else {
        m.matmul(m)
    };
    let (s2, r2) = sign_of(&j2, &ComplexMatrix::identity(n));
    let (sd, rd) = sign_of(&conjugate(triple.dirac()), triple.dirac());
    let (sg, rg) = match triple.grading() {
        Some(g) => {
            let (s, r) = sign_of(&conjugate(g), g);
            (Some(s), r)
        }
        None => (None, 0.0),
    };
    let rows = compatible_rows(s2, sd, sg);
    let residual = unitary.max(invol).max(r2).max(rd).max(rg);
    let signs = match sg {
        Some(g) => format!("({s2:+}, {sd:+}, {g:+})"),
        None => format!("({s2:+}, {sd:+})"),
    };
    let mut v = AxiomVerdict::new(
        name,
        residual,
        tol,
        format!("signs {signs}, compatible p mod 8: {rows:?}"),
    )
    .with_metric("j_squared", s2 as f64)
    .with_metric("jd", sd as f64)
    .with_metric("antiunitary_defect", unitary)
    .with_metric("involution_defect", invol);
    if let Some(g) = sg {
        v.metrics.insert("jgamma".into(), g as f64);
    }
    for r in &rows {
        v.metrics.insert(format!("row_{r}"), 1.0);
    }
    match triple.claimed_dimension() {
        Some(p) if !rows.contains(&(p % 8)) => {
            v.status = Status::Fail;
            v.details
                .push_str(&format!("; claimed p = {p} is not compatible"));
        }
        None => {
            v.status = Status::Inconclusive;
            v.details.push_str("; no claimed dimension to compare");
        }
        _ => {}
    }
    v
}

/// Eigenvalue clusters of a hermitian matrix (sorted ascending).
fn clusters(values: &[f64], rel: f64) -> Vec<std::ops::Range<usize>> {
    let scale = values
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > rel * scale {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn random_hermitian_combination(mats: &[&ComplexMatrix], seed: u64) -> ComplexMatrix {
    let mut r = rng(seed);
    let n = mats[0].dim();
    let mut h = ComplexMatrix::zeros(n);
    for m in mats {
        let s = m.operator_norm().max(1e-300);
        h.add_scaled(c64(r.random_range(0.5..1.5) / s, 0.0), &m.hermitian_part());
        h.add_scaled(c64(r.random_range(0.5..1.5) / s, 0.0), &m.skew_part());
    }
    h.hermitian_part()
}

/// Dimension of {T : [T, X] = 0 for all X in `set`}.
///
/// T commutes with a random hermitian combination H of the set, so it is
/// block diagonal in H's eigenbasis; the remaining linear conditions are
/// solved through their Gram matrix on those blocks. Inputs are scaled to
/// unit norm and `tol` cuts the Gram eigenvalues absolutely.
pub fn commutant_dimension(set: &[&ComplexMatrix], tol: f64, seed: u64) -> Result<usize> {
    let n = set.first().map_or(0, |m| m.dim());
    if n == 0 {
        return Ok(0);
    }
    let h = random_hermitian_combination(set, seed);
    let eig = h.eigh()?;
    let v = &eig.vectors;
    let vd = v.adjoint();
    let xs: Vec<ComplexMatrix> = set
        .iter()
        .map(|x| {
            vd.matmul(x)
                .matmul(v)
                .scale_real(1.0 / x.operator_norm().max(1e-300))
        })
        .collect();
    let cl = clusters(&eig.values, 1e-9);
    // unknowns: matrix units E_ab inside a cluster
    let units: Vec<(usize, usize)> = cl
        .iter()
        .flat_map(|r| r.clone().flat_map(move |a| r.clone().map(move |b| (a, b))))
        .collect();
    let u = units.len();
    if u > 4096 {
        return Err(Error::Precondition(format!(
            "commutant search space too large ({u} unknowns)"
        )));
    }
    let xxd: Vec<ComplexMatrix> = xs.iter().map(|x| x.matmul(&x.adjoint())).collect();
    let xdx: Vec<ComplexMatrix> = xs.iter().map(|x| x.adjoint().matmul(x)).collect();
    // G_{(ab),(cd)} = Σ_X ⟨[E_ab, X], [E_cd, X]⟩
    let g = DMatrix::from_fn(u, u, |i, k| {
        let (a, b) = units[i];
        let (c, d) = units[k];
        let mut s = ZERO;
        for (x, (p, q)) in xs.iter().zip(xxd.iter().zip(&xdx)) {
            if a == c {
                s += p[(d, b)];
            }
            if b == d {
                s += q[(a, c)];
            }
            s -= x[(b, d)].conj() * x[(a, c)];
            s -= x[(d, b)] * x[(c, a)].conj();
        }
        s
    });
    // inputs are normalised, so the cut is absolute; a relative cut would
    // misread the all-roundoff gram of a scalar set
    let vals = g.symmetric_eigenvalues();
    Ok(vals.iter().filter(|&&l| l <= tol).count())
}

/// Irreducibility: the joint commutant of D and the algebra is C·1.
pub fn check_irreducibility(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    check_irreducibility_seeded(triple, tol, 0)
}

pub fn check_irreducibility_seeded(triple: &SpectralTriple, tol: f64, seed: u64) -> AxiomVerdict {
    let name = "irreducibility";
    let mut set: Vec<&ComplexMatrix> = vec![triple.dirac()];
    set.extend(triple.generators().iter().map(|(_, g)| g));
    // gram eigenvalues are squared singular values; below ~1e3 ulp they are roundoff
    let cut = tol.powi(2).max(2e-13);
    match commutant_dimension(&set, cut, seed) {
        Err(e) => AxiomVerdict::inconclusive(name, tol, e.to_string()),
        Ok(d) => AxiomVerdict::new(
            name,
            (d as f64 - 1.0).abs(),
            0.0,
            format!("commutant dimension {d}"),
        )
        .with_metric("commutant_dimension", d as f64),
    }
}

/// Elements a of the monomial span with [D,a] = 0 on interior modes,
/// modulo elements vanishing on interior modes. Returned compressed.
fn interior_kernel(
    triple: &SpectralTriple,
    degree: usize,
    width: usize,
) -> Result<Vec<ComplexMatrix>> {
    let mask = triple.interior_mask(width);
    let mons: Vec<ComplexMatrix> = monomials(triple, degree)
        .into_iter()
        .map(|m| mask.compress(&m.matrix))
        .collect();
    let dmask = mask.compress(triple.dirac());
    let cs: Vec<ComplexMatrix> = mons
        .iter()
        .map(|a| commutator(&dmask, a).expect("same dim"))
        .collect();
    let k = mons.len();
    let inner = |a: &ComplexMatrix, b: &ComplexMatrix| -> C64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.conj() * y)
            .sum()
    };
    let mut g = DMatrix::from_fn(k, k, |i, j| inner(&cs[i], &cs[j]));
    // normalize by monomial size so the threshold is scale-free
    let w: Vec<f64> = mons
        .iter()
        .map(|m| m.frobenius_norm().max(1e-300))
        .collect();
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] /= w[i] * w[j];
        }
    }
    let eig = g.symmetric_eigen();
    let dscale = dmask.operator_norm().max(1.0).powi(2);
    let mut kernel: Vec<ComplexMatrix> = Vec::new();
    for r in 0..k {
        if eig.eigenvalues[r] <= 1e-18 * dscale {
            let mut a = ComplexMatrix::zeros(dmask.dim());
            for i in 0..k {
                a.add_scaled(eig.eigenvectors[(i, r)] / w[i], &mons[i]);
            }
            kernel.push(a);
        }
    }
    // orthonormalize the compressed kernel elements; drop vanishing ones
    let mut basis: Vec<ComplexMatrix> = Vec::new();
    for mut a in kernel {
        let n0 = a.frobenius_norm();
        for b in &basis {
            let c = inner(b, &a);
            a.add_scaled(-c, b);
        }
        let n = a.frobenius_norm();
        if n > 1e-8 * n0.max(1e-300) && n > 1e-10 {
            basis.push(a.scale_real(1.0 / n));
        }
    }
    Ok(basis)
}

/// Connected components from the kernel of [D,·]: spectral projectors of a
/// random selfadjoint kernel element, checked to lie in the kernel span.
pub fn connected_components(
    triple: &SpectralTriple,
    degree: usize,
    width: usize,
    seed: u64,
) -> Result<(usize, f64)> {
    let basis = interior_kernel(triple, degree, width)?;
    if basis.is_empty() {
        return Err(Error::Numerical(
            "kernel of [D,·] does not contain the identity".into(),
        ));
    }
    let mut r = rng(seed);
    let n = basis[0].dim();
    let mut h = ComplexMatrix::zeros(n);
    for b in &basis {
        h.add_scaled(c64(r.random_range(-1.0..1.0), 0.0), &b.hermitian_part());
        h.add_scaled(c64(r.random_range(-1.0..1.0), 0.0), &b.skew_part());
    }
    let h = h.hermitian_part();
    let eig = h.eigh()?;
    let cl = clusters(&eig.values, 1e-7);
    let inner = |a: &ComplexMatrix, b: &ComplexMatrix| -> C64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.conj() * y)
            .sum()
    };
    let mut worst: f64 = 0.0;
    for c in &cl {
        let proj = ComplexMatrix::from_fn(n, |i, j| {
            c.clone()
                .map(|k| eig.vectors[(i, k)] * eig.vectors[(j, k)].conj())
                .sum()
        });
        let mut rem = proj.clone();
        for b in &basis {
            let z = inner(b, &proj);
            rem.add_scaled(-z, b);
        }
        worst = worst.max(rem.frobenius_norm() / proj.frobenius_norm().max(1e-300));
    }
    Ok((cl.len(), worst))
}

/// Connectivity: the kernel of [D,·] in the algebra is spanned by
/// orthogonal projectors summing to 1; reports the component count.
pub fn check_connectivity(triple: &SpectralTriple, tol: f64) -> AxiomVerdict {
    check_connectivity_with(triple, tol, 2, 2, 0)
}

pub fn check_connectivity_with(
    triple: &SpectralTriple,
    tol: f64,
    degree: usize,
    width: usize,
    seed: u64,
) -> AxiomVerdict {
    let name = "connectivity";
    match connected_components(triple, degree, width, seed) {
        Err(e) => AxiomVerdict::inconclusive(name, tol, e.to_string()),
        Ok((count, res)) => AxiomVerdict::new(
            name,
            res,
            tol.max(1e-8),
            format!("{count} component(s); projector residual {res:.3e}"),
        )
        .with_metric("components", count as f64),
    }
}

/// A hermitian pairing M that commutes with the algebra and D is a
/// positive multiple of the identity on an irreducible model.
pub fn check_pairing_standard(
    triple: &SpectralTriple,
    m: &ComplexMatrix,
    tol: f64,
) -> Result<AxiomVerdict> {
    let name = "pairing_standard";
    m.check_same_dim(triple.dirac())?;
    if !m.is_hermitian(tol.max(1e-12) * m.norm_bound().max(1.0)) {
        return Err(Error::Precondition("M is not hermitian".into()));
    }
    let eigs = m.eigvalsh()?;
    let mnorm = eigs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if eigs.first().copied().unwrap_or(0.0) < -tol.max(1e-12) * mnorm.max(1.0) {
        return Err(Error::Precondition("M is not positive semidefinite".into()));
    }
    let scale = mnorm + SCALE_FLOOR;
    let mut comm_a: f64 = 0.0;
    for (_, a) in triple.generators() {
        comm_a = comm_a
            .max(commutator(m, a)?.operator_norm() / (scale * (a.operator_norm() + SCALE_FLOOR)));
    }
    let d = triple.dirac();
    let comm_d = commutator(m, d)?.operator_norm() / (scale * (d.operator_norm() + SCALE_FLOOR));
    let n = m.dim() as f64;
    let lambda = m.trace().re / n;
    let scalar = (m - &ComplexMatrix::scalar(m.dim(), c64(lambda, 0.0))).operator_norm() / scale;
    let residual = comm_a.max(comm_d).max(scalar);
    let stage = if comm_a > tol {
        "fails to commute with the algebra"
    } else if comm_d > tol {
        "fails to commute with D"
    } else if scalar > tol {
        "commutes but is not scalar"
    } else {
        "is a positive multiple of the identity"
    };
    let mut v = AxiomVerdict::new(name, residual, tol, format!("M {stage} (λ = {lambda:.6})"))
        .with_metric("algebra_commutator", comm_a)
        .with_metric("dirac_commutator", comm_d)
        .with_metric("scalar_defect", scalar);
    if v.passed() && !(lambda > 0.0) {
        v.status = Status::Fail;
        v.details.push_str("; the multiple is not positive");
    }
    Ok(v)
}

/// Absolute continuity: ∮ a⟨D⟩^{−p} > 0 for sampled positive a = h², h a random
/// selfadjoint element of the degree-one span. The residual is the
/// shortfall max(0, tol − min estimate).
pub fn check_absolute_continuity(
    triple: &SpectralTriple,
    tol: f64,
    samples: usize,
    seed: u64,
) -> AxiomVerdict {
    let name = "absolute_continuity";
    if triple.claimed_dimension().is_none() {
        return AxiomVerdict::inconclusive(name, tol, "no claimed dimension");
    }
    let mut r = rng(seed);
    let n = triple.dim();
    let mut min = f64::INFINITY;
    let mut unconverged = 0;
    for _ in 0..samples.max(1) {
        let mut h = ComplexMatrix::scalar(n, c64(r.random_range(0.5..1.5), 0.0));
        for (_, g) in triple.generators() {
            let s = g.operator_norm().max(1e-300);
            h.add_scaled(c64(r.random_range(-0.5..0.5) / s, 0.0), &g.hermitian_part());
            h.add_scaled(c64(r.random_range(-0.5..0.5) / s, 0.0), &g.skew_part());
        }
        let h = h.hermitian_part();
        let a = h.matmul(&h);
        if a.is_zero() {
            continue;
        }
        match measure_functional(triple, &a) {
            Err(e) => return AxiomVerdict::inconclusive(name, tol, e.to_string()),
            Ok(est) => {
                min = min.min(est.value.re);
                if !est.converged {
                    unconverged += 1;
                }
            }
        }
    }
    if unconverged > 0 {
        let mut v = AxiomVerdict::inconclusive(
            name,
            tol,
            format!("{unconverged} estimates did not converge (min {min:.4})"),
        );
        v.residual = (tol - min).max(0.0);
        return v;
    }
    AxiomVerdict::new(
        name,
        (tol - min).max(0.0),
        0.0,
        format!("min estimate {min:.4} against threshold {tol:e}"),
    )
    .with_metric("min_estimate", min)
    .with_metric("threshold", tol)
}

/// Metric boundedness through its sufficient premise: [D,a] = 0 inside the
/// algebra span forces a ∈ C·1. Probe pairs report sampled distances.
pub fn check_metric_boundedness(
    triple: &SpectralTriple,
    probes: &[(PointState, PointState)],
    config: &CheckConfig,
) -> AxiomVerdict {
    let name = "metric";
    let basis = match interior_kernel(triple, config.span_degree, config.mask_width) {
        Ok(b) => b,
        Err(e) => return AxiomVerdict::inconclusive(name, config.tol, e.to_string()),
    };
    let kdim = basis.len();
    if kdim != 1 {
        return AxiomVerdict::inconclusive(
            name,
            config.tol,
            format!("kernel of [D,·] has dimension {kdim}; the premise fails so finiteness is not certified"),
        )
        .with_metric("kernel_dimension", kdim as f64);
    }
    let mut diameter: f64 = 0.0;
    for (a, b) in probes {
        match connes_distance(triple, a, b, config.span_degree.max(1)) {
            Ok(d) => diameter = diameter.max(d.value),
            Err(e) => return AxiomVerdict::inconclusive(name, config.tol, e.to_string()),
        }
    }
    AxiomVerdict::new(
        name,
        0.0,
        config.tol,
        format!("kernel is C·1; sampled max distance {diameter:.6}"),
    )
    .with_metric("kernel_dimension", 1.0)
    .with_metric("sampled_diameter", diameter)
}

/// Runs every checker the triple has data for.
///
/// `fingerprint` identifies the serialized triple.
pub fn run_full_report(
    triple: &SpectralTriple,
    config: &CheckConfig,
    fingerprint: String,
) -> AxiomReport {
    let tol = config.tol;
    let w = config.mask_width;
    let probes: Vec<(PointState, PointState)> = match triple.fibres() {
        Some(f) if f.len() >= 2 => vec![(
            PointState::Point(f.points()[0].label.clone()),
            PointState::Point(f.points()[f.len() / 2].label.clone()),
        )],
        _ => Vec::new(),
    };
    let jobs: Vec<Box<dyn Fn() -> AxiomVerdict + Sync + '_>> = vec![
        Box::new(|| check_dimension(triple, config.dimension_tol)),
        Box::new(|| check_metric_boundedness(triple, &probes, config)),
        Box::new(|| check_regularity_masked(triple, config.regularity_order, w)),
        Box::new(|| check_absolute_continuity(triple, tol, config.samples, config.seed)),
        Box::new(|| check_first_order_masked(triple, tol, w)),
        Box::new(|| check_orientability_masked(triple, tol, w)),
        Box::new(|| {
            AxiomVerdict::not_evaluated(
                "poincare_duality",
                "not evaluated: out of scope (K-theoretic fundamental class)",
            )
        }),
        Box::new(|| check_reality(triple, tol)),
        Box::new(|| check_irreducibility_seeded(triple, tol, config.seed)),
        Box::new(|| check_closedness(triple, config.dixmier_tol, config.samples, config.seed)),
        Box::new(|| check_connectivity_with(triple, tol, config.span_degree, w, config.seed)),
    ];
    let verdicts = crate::par::map_slice(&jobs, |j| j());
    AxiomReport {
        triple: triple.name().into(),
        fingerprint,
        seed: config.seed,
        verdicts,
    }
}
