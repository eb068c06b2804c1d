//! The spectral triple data model and its elementary operator calculus.

use std::borrow::Cow;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c64, commutator, ComplexMatrix, HermitianEigen, C64, ONE, ZERO};
use crate::par;

/// Default absolute tolerance for structural invariants.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Reserved factor name that always resolves to the identity.
pub const IDENTITY_NAME: &str = "1";

/// An algebra element inside a chain: a generator reference or an explicit matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Generator(String),
    Matrix(ComplexMatrix),
}

impl Factor {
    pub fn named(name: &str) -> Self {
        Factor::Generator(name.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTerm {
    pub coefficient: C64,
    pub factors: Vec<Factor>,
}

/// A Hochschild p-chain Σ coeff·a⁰⊗a¹⊗…⊗aᵖ.
#[derive(Clone, Debug, PartialEq)]
pub struct HochschildChain {
    degree: usize,
    terms: Vec<ChainTerm>,
}

impl HochschildChain {
    pub fn new(degree: usize, terms: Vec<ChainTerm>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if t.factors.len() != degree + 1 {
                return Err(Error::Degree(format!(
                    "term {k} has {} factors, degree {degree} needs {}",
                    t.factors.len(),
                    degree + 1
                )));
            }
        }
        Ok(Self { degree, terms })
    }

    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            terms: Vec::new(),
        }
    }

    /// Single term with named factors.
    pub fn monomial(coefficient: C64, names: &[&str]) -> Result<Self> {
        let factors = names.iter().map(|n| Factor::named(n)).collect::<Vec<_>>();
        Self::new(
            names.len().saturating_sub(1),
            vec![ChainTerm {
                coefficient,
                factors,
            }],
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[ChainTerm] {
        &self.terms
    }

    pub fn scaled(&self, z: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ChainTerm {
                coefficient: t.coefficient * z,
                factors: t.factors.clone(),
            })
            .collect();
        Self {
            degree: self.degree,
            terms,
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if other.degree != self.degree {
            return Err(Error::Degree(format!(
                "cannot add chains of degree {} and {}",
                self.degree, other.degree
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            degree: self.degree,
            terms,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub label: String,
    pub coords: Vec<f64>,
}

/// Partition of the Hilbert basis into fibres over labelled sample points.
///
/// Within every fibre the basis indices are listed in a fixed spinor order,
/// so slot `s` of one fibre is identified with slot `s` of every other.
#[derive(Clone, Debug, PartialEq)]
pub struct FibreDecomposition {
    points: Vec<SamplePoint>,
    indices: Vec<Vec<usize>>,
    owner: Vec<(usize, usize)>,
}

impl FibreDecomposition {
    pub fn new(points: Vec<SamplePoint>, indices: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        if points.len() != indices.len() {
            return Err(Error::InvalidTriple(format!(
                "{} points but {} fibres",
                points.len(),
                indices.len()
            )));
        }
        let mut owner = vec![(usize::MAX, 0); dim];
        for (x, fibre) in indices.iter().enumerate() {
            if fibre.is_empty() {
                return Err(Error::InvalidTriple(format!("fibre {x} is empty")));
            }
            for (s, &j) in fibre.iter().enumerate() {
                if j >= dim {
                    return Err(Error::InvalidTriple(format!(
                        "fibre index {j} out of range"
                    )));
                }
                if owner[j].0 != usize::MAX {
                    return Err(Error::InvalidTriple(format!(
                        "basis index {j} in two fibres"
                    )));
                }
                owner[j] = (x, s);
            }
        }
        if let Some(j) = owner.iter().position(|o| o.0 == usize::MAX) {
            return Err(Error::InvalidTriple(format!("basis index {j} in no fibre")));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(Error::InvalidTriple(format!(
                    "duplicate point label `{}`",
                    p.label
                )));
            }
        }
        Ok(Self {
            points,
            indices,
            owner,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn fibre(&self, x: usize) -> &[usize] {
        &self.indices[x]
    }

    pub fn all_fibres(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Common fibre size N, if all fibres agree.
    pub fn rank(&self) -> Option<usize> {
        let n = self.indices[0].len();
        self.indices.iter().all(|f| f.len() == n).then_some(n)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.position(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn diagonal_block(&self, t: &ComplexMatrix, x: usize) -> DMatrix<C64> {
        let f = &self.indices[x];
        t.submatrix(f, f)
    }

    /// The fibre value of `t` at `x`: its block row summed over all column
    /// fibres, Σ_y T[x, y]. For operators that do not mix fibres this is the
    /// diagonal block; for difference operators it is their local symbol
    /// (the constant section is the probe), which is what pointwise geometry
    /// reads off on a lattice.
    pub fn symbol(&self, t: &ComplexMatrix, x: usize) -> DMatrix<C64> {
        let rows = &self.indices[x];
        let n = rows.len();
        let mut out = DMatrix::from_element(n, n, ZERO);
        for (r, &i) in rows.iter().enumerate() {
            for (j, z) in t.row(i).iter().enumerate() {
                if z.re == 0.0 && z.im == 0.0 {
                    continue;
                }
                let s = self.owner[j].1;
                if s < n {
                    out[(r, s)] += *z;
                }
            }
        }
        out
    }

    pub fn symbols(&self, t: &ComplexMatrix) -> Vec<DMatrix<C64>> {
        par::map_range(self.len(), |x| self.symbol(t, x))
    }

    /// sup over points of the fibre-value norm.
    pub fn endomorphism_norm(&self, t: &ComplexMatrix) -> f64 {
        par::map_range(self.len(), |x| {
            crate::linalg::dmatrix_norm(&self.symbol(t, x))
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Largest entry of `t` coupling two different fibres.
    pub fn off_fibre_defect(&self, t: &ComplexMatrix) -> f64 {
        let n = t.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.owner[i].0 != self.owner[j].0 {
                    worst = worst.max(t[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Normalized fibre trace (1/N_x)·tr T_xx at every point.
    pub fn point_values(&self, t: &ComplexMatrix) -> Vec<C64> {
        self.indices
            .iter()
            .map(|f| {
                let s: C64 = f.iter().map(|&j| t[(j, j)]).sum();
                s / f.len() as f64
            })
            .collect()
    }

    /// Diagonal operator acting as the scalar `values[x]` on fibre x.
    pub fn scalar_function(&self, values: &[C64]) -> ComplexMatrix {
        let mut diag = vec![ZERO; self.owner.len()];
        for (x, f) in self.indices.iter().enumerate() {
            for &j in f {
                diag[j] = values[x];
            }
        }
        ComplexMatrix::from_diagonal(&diag)
    }

    pub fn real_function(&self, values: &[f64]) -> ComplexMatrix {
        let v: Vec<C64> = values.iter().map(|&x| c64(x, 0.0)).collect();
        self.scalar_function(&v)
    }

    /// Fibre-local operator with the given per-point blocks.
    pub fn block_diagonal(&self, blocks: &[DMatrix<C64>]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.owner.len());
        for (x, f) in self.indices.iter().enumerate() {
            for (r, &i) in f.iter().enumerate() {
                for (s, &j) in f.iter().enumerate() {
                    m[(i, j)] = blocks[x][(r, s)];
                }
            }
        }
        m
    }
}

/// J = matrix ∘ (entrywise conjugation) when `conjugates` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct RealStructure {
    pub matrix: ComplexMatrix,
    pub conjugates: bool,
}

/// Chart suggestion shipped with a builder: named or inline coordinates and
/// an optional declared domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartHint {
    pub label: String,
    pub coordinates: Vec<Factor>,
    pub names: Vec<String>,
    pub domain: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointState {
    Point(String),
    Density(ComplexMatrix),
}

/// How to integrate algebra elements against the Riemannian volume.
#[derive(Clone, Debug, PartialEq)]
pub enum VolumeForm {
    /// Quadrature weight per sample point; a(x) is the normalized fibre trace.
    Weights(Vec<f64>),
    /// Fourier models: ∫ a = total·⟨e₀, a e₀⟩, reading off the constant mode.
    Fourier { zero_mode: usize, total: f64 },
}

/// Raw ingredients of a triple, validated by [`SpectralTriple::new`].
#[derive(Clone, Debug)]
pub struct TripleParts {
    pub name: String,
    pub generators: Vec<(String, ComplexMatrix)>,
    pub dirac: ComplexMatrix,
    pub grading: Option<ComplexMatrix>,
    pub real_structure: Option<RealStructure>,
    pub claimed_dimension: Option<usize>,
    pub cycle: Option<HochschildChain>,
    pub fibres: Option<FibreDecomposition>,
    pub commutative: bool,
    /// Riemannian volume data used to compare against integrals.
    pub volume: Option<VolumeForm>,
    /// For truncated spectral models: distance of each basis index from the
    /// truncation edge, used for interior-mode masks.
    pub boundary_distance: Option<Vec<usize>>,
    pub atlas_hint: Option<Vec<ChartHint>>,
}

impl TripleParts {
    pub fn new(name: &str, dirac: ComplexMatrix) -> Self {
        Self {
            name: name.to_string(),
            generators: Vec::new(),
            dirac,
            grading: None,
            real_structure: None,
            claimed_dimension: None,
            cycle: None,
            fibres: None,
            commutative: false,
            volume: None,
            boundary_distance: None,
            atlas_hint: None,
        }
    }
}

/// A validated, immutable spectral triple.
#[derive(Clone, Debug)]
pub struct SpectralTriple {
    parts: TripleParts,
    dirac_eigen: OnceLock<HermitianEigen>,
}

impl SpectralTriple {
    pub fn new(parts: TripleParts) -> Result<Self> {
        Self::with_tolerance(parts, DEFAULT_TOL)
    }

    /// Validates every construction invariant at absolute tolerance `tol`
    /// (multiplied by a bound on ‖D‖ wherever D enters).
    pub fn with_tolerance(parts: TripleParts, tol: f64) -> Result<Self> {
        validate(&parts, tol)?;
        Ok(Self {
            parts,
            dirac_eigen: OnceLock::new(),
        })
    }

    pub fn parts(&self) -> &TripleParts {
        &self.parts
    }

    pub fn into_parts(self) -> TripleParts {
        self.parts
    }

    pub fn name(&self) -> &str {
        &self.parts.name
    }

    pub fn dim(&self) -> usize {
        self.parts.dirac.dim()
    }

    pub fn generators(&self) -> &[(String, ComplexMatrix)] {
        &self.parts.generators
    }

    pub fn generator(&self, name: &str) -> Result<&ComplexMatrix> {
        self.parts
            .generators
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }

    pub fn dirac(&self) -> &ComplexMatrix {
        &self.parts.dirac
    }

    pub fn grading(&self) -> Option<&ComplexMatrix> {
        self.parts.grading.as_ref()
    }

    /// Γ, or the identity for ungraded (odd) triples.
    pub fn grading_or_identity(&self) -> Cow<'_, ComplexMatrix> {
        match &self.parts.grading {
            Some(g) => Cow::Borrowed(g),
            None => Cow::Owned(ComplexMatrix::identity(self.dim())),
        }
    }

    pub fn real_structure(&self) -> Option<&RealStructure> {
        self.parts.real_structure.as_ref()
    }

    pub fn claimed_dimension(&self) -> Option<usize> {
        self.parts.claimed_dimension
    }

    pub fn cycle(&self) -> Option<&HochschildChain> {
        self.parts.cycle.as_ref()
    }

    pub fn fibres(&self) -> Option<&FibreDecomposition> {
        self.parts.fibres.as_ref()
    }

    pub fn require_fibres(&self) -> Result<&FibreDecomposition> {
        self.fibres()
            .ok_or_else(|| Error::Missing("triple has no fibre decomposition".into()))
    }

    pub fn is_commutative(&self) -> bool {
        self.parts.commutative
    }

    pub fn volume(&self) -> Option<&VolumeForm> {
        self.parts.volume.as_ref()
    }

    /// Spinor rank N: the common fibre size, or 1 without fibres.
    pub fn spinor_rank(&self) -> Result<usize> {
        match self.fibres() {
            Some(f) => f
                .rank()
                .ok_or_else(|| Error::InvalidTriple("fibres have unequal sizes".into())),
            None => Ok(1),
        }
    }

    /// ∫ a dvol using the stored volume data.
    pub fn integrate(&self, a: &ComplexMatrix) -> Result<C64> {
        match self.volume() {
            Some(VolumeForm::Weights(w)) => {
                let f = self.require_fibres()?;
                Ok(f.point_values(a).iter().zip(w).map(|(v, w)| v * *w).sum())
            }
            Some(VolumeForm::Fourier { zero_mode, total }) => {
                Ok(a[(*zero_mode, *zero_mode)] * *total)
            }
            None => Err(Error::Missing("triple carries no volume data".into())),
        }
    }

    pub fn atlas_hint(&self) -> Option<&[ChartHint]> {
        self.parts.atlas_hint.as_deref()
    }

    pub fn resolve<'a>(&'a self, f: &'a Factor) -> Result<Cow<'a, ComplexMatrix>> {
        match f {
            Factor::Matrix(m) => {
                if m.dim() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        found: m.dim(),
                    });
                }
                Ok(Cow::Borrowed(m))
            }
            Factor::Generator(n) if n == IDENTITY_NAME => {
                Ok(Cow::Owned(ComplexMatrix::identity(self.dim())))
            }
            Factor::Generator(n) => self.generator(n).map(Cow::Borrowed),
        }
    }

    /// [D, a]
    pub fn d(&self, a: &ComplexMatrix) -> ComplexMatrix {
        commutator(&self.parts.dirac, a).expect("dimension checked at construction")
    }

    /// Cached eigendecomposition of D.
    pub fn dirac_eigen(&self) -> Result<&HermitianEigen> {
        if let Some(e) = self.dirac_eigen.get() {
            return Ok(e);
        }
        let e = self.parts.dirac.eigh()?;
        Ok(self.dirac_eigen.get_or_init(|| e))
    }

    /// |D| via the eigendecomposition of D.
    pub fn abs_dirac(&self) -> Result<ComplexMatrix> {
        Ok(self.dirac_eigen()?.map(|l| c64(l.abs(), 0.0)))
    }

    /// ⟨D⟩^{−s} = (1 + D²)^{−s/2}.
    pub fn bracket_power(&self, s: f64) -> Result<ComplexMatrix> {
        Ok(self
            .dirac_eigen()?
            .map(|l| c64((1.0 + l * l).powf(-s / 2.0), 0.0)))
    }

    /// Interior-mode mask of width `w`; everything when the model is not truncated.
    pub fn interior_mask(&self, w: usize) -> Mask {
        match &self.parts.boundary_distance {
            Some(bd) => Mask {
                keep: Some((0..bd.len()).filter(|&j| bd[j] >= w).collect()),
            },
            None => Mask { keep: None },
        }
    }

    /// Same data with D replaced (used for scaling and conjugation studies).
    pub fn with_dirac(&self, dirac: ComplexMatrix) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.dirac = dirac;
        Self::new(parts)
    }

    /// Conjugates D, Γ, generators and inline chain factors by the unitary `u`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        let ud = u.adjoint();
        let conj = |m: &ComplexMatrix| u.matmul(m).matmul(&ud);
        let mut parts = self.parts.clone();
        parts.dirac = conj(&parts.dirac).hermitian_part();
        parts.grading = parts.grading.as_ref().map(|g| conj(g).hermitian_part());
        for (_, g) in parts.generators.iter_mut() {
            *g = conj(g);
        }
        if let Some(c) = &parts.cycle {
            let terms = c
                .terms()
                .iter()
                .map(|t| ChainTerm {
                    coefficient: t.coefficient,
                    factors: t
                        .factors
                        .iter()
                        .map(|f| match f {
                            Factor::Matrix(m) => Factor::Matrix(conj(m)),
                            other => other.clone(),
                        })
                        .collect(),
                })
                .collect();
            parts.cycle = Some(HochschildChain::new(c.degree(), terms)?);
        }
        // fibres, J, hints and the edge mask refer to the old basis
        parts.fibres = None;
        parts.real_structure = None;
        parts.atlas_hint = None;
        parts.volume = None;
        parts.boundary_distance = None;
        Self::new(parts)
    }
}

/// Restriction to interior basis indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    keep: Option<Vec<usize>>,
}

impl Mask {
    pub fn all() -> Self {
        Self { keep: None }
    }

    pub fn indices(&self) -> Option<&[usize]> {
        self.keep.as_deref()
    }

    pub fn compress(&self, t: &ComplexMatrix) -> ComplexMatrix {
        match &self.keep {
            Some(k) if !k.is_empty() => t.restrict(k),
            _ => t.clone(),
        }
    }

    /// Operator norm of the compression P·T·P.
    pub fn norm(&self, t: &ComplexMatrix) -> f64 {
        self.compress(t).operator_norm()
    }
}

fn validate(p: &TripleParts, tol: f64) -> Result<()> {
    let n = p.dirac.dim();
    let dscale = p.dirac.norm_bound().max(1.0);
    let dh = p.dirac.hermitian_defect();
    if dh > tol * dscale {
        return Err(Error::InvalidTriple(format!(
            "D is not hermitian (defect {dh:.3e})"
        )));
    }
    let mut names = std::collections::HashSet::new();
    for (name, g) in &p.generators {
        if name == IDENTITY_NAME {
            return Err(Error::InvalidTriple(format!(
                "`{IDENTITY_NAME}` is a reserved name"
            )));
        }
        if !names.insert(name.as_str()) {
            return Err(Error::InvalidTriple(format!(
                "duplicate generator `{name}`"
            )));
        }
        g.check_same_dim(&p.dirac)?;
    }
    check_adjoint_closed(&p.generators, tol)?;
    if let Some(gamma) = &p.grading {
        gamma.check_same_dim(&p.dirac)?;
        let h = gamma.hermitian_defect();
        if h > tol {
            return Err(Error::InvalidTriple(format!(
                "Γ is not selfadjoint (defect {h:.3e})"
            )));
        }
        let sq = (&gamma.matmul(gamma) - &ComplexMatrix::identity(n)).max_abs();
        if sq > tol {
            return Err(Error::InvalidTriple(format!("Γ² ≠ 1 (defect {sq:.3e})")));
        }
        for (name, g) in &p.generators {
            let c = commutator(gamma, g)?.max_abs();
            if c > tol * g.max_abs().max(1.0) {
                return Err(Error::InvalidTriple(format!(
                    "Γ does not commute with `{name}` (defect {c:.3e})"
                )));
            }
        }
        let anti = crate::linalg::anticommutator(gamma, &p.dirac)?.max_abs();
        if anti > tol * dscale {
            return Err(Error::InvalidTriple(format!(
                "ΓD + DΓ ≠ 0 (defect {anti:.3e})"
            )));
        }
    }
    if let Some(j) = &p.real_structure {
        j.matrix.check_same_dim(&p.dirac)?;
    }
    if let Some(f) = &p.fibres {
        // re-run the partition check against this dimension
        FibreDecomposition::new(f.points.clone(), f.indices.clone(), n)?;
        if let Some(VolumeForm::Weights(w)) = &p.volume {
            if w.len() != f.len() {
                return Err(Error::InvalidTriple(format!(
                    "{} volume weights for {} points",
                    w.len(),
                    f.len()
                )));
            }
        }
    } else if let Some(VolumeForm::Weights(_)) = &p.volume {
        return Err(Error::InvalidTriple(
            "volume weights need a fibre decomposition".into(),
        ));
    }
    if let Some(VolumeForm::Fourier { zero_mode, .. }) = &p.volume {
        if *zero_mode >= n {
            return Err(Error::InvalidTriple("zero mode index out of range".into()));
        }
    }
    if let Some(bd) = &p.boundary_distance {
        if bd.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bd.len(),
            });
        }
    }
    let lookup = |f: &Factor| -> Result<()> {
        match f {
            Factor::Matrix(m) => m.check_same_dim(&p.dirac),
            Factor::Generator(name) if name == IDENTITY_NAME => Ok(()),
            Factor::Generator(name) => {
                if p.generators.iter().any(|(n, _)| n == name) {
                    Ok(())
                } else {
                    Err(Error::UnknownGenerator(name.clone()))
                }
            }
        }
    };
    if let Some(c) = &p.cycle {
        for t in c.terms() {
            t.factors.iter().try_for_each(lookup)?;
        }
    }
    if let Some(hints) = &p.atlas_hint {
        for h in hints {
            h.coordinates.iter().try_for_each(lookup)?;
            if h.names.len() != h.coordinates.len() {
                return Err(Error::InvalidTriple(format!(
                    "chart hint `{}` names do not match its coordinates",
                    h.label
                )));
            }
            if let (Some(dom), Some(f)) = (&h.domain, &p.fibres) {
                for l in dom {
                    f.require(l)?;
                }
            }
        }
    }
    Ok(())
}

/// Every generator's adjoint must lie in the complex span of the generators.
fn check_adjoint_closed(gens: &[(String, ComplexMatrix)], tol: f64) -> Result<()> {
    let non_hermitian: Vec<usize> = (0..gens.len())
        .filter(|&k| gens[k].1.hermitian_defect() > tol * gens[k].1.max_abs().max(1.0))
        .collect();
    if non_hermitian.is_empty() {
        return Ok(());
    }
    let m = gens.len();
    let inner = |a: &ComplexMatrix, b: &ComplexMatrix| -> C64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.conj() * y)
            .sum()
    };
    let gram = DMatrix::from_fn(m, m, |i, j| inner(&gens[i].1, &gens[j].1));
    // pseudo-inverse tolerates linearly dependent generator lists
    let pinv = gram
        .clone()
        .pseudo_inverse(1e-12 * gram.norm().max(1e-300))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    for k in non_hermitian {
        let target = gens[k].1.adjoint();
        let rhs = nalgebra::DVector::from_fn(m, |i, _| inner(&gens[i].1, &target));
        let coef = &pinv * rhs;
        let mut approx = ComplexMatrix::zeros(target.dim());
        for i in 0..m {
            approx.add_scaled(coef[i], &gens[i].1);
        }
        let resid = (&approx - &target).frobenius_norm();
        if resid > tol.sqrt() * target.frobenius_norm().max(1.0) {
            return Err(Error::InvalidTriple(format!(
                "adjoint of `{}` is not in the generator span (residual {resid:.3e})",
                gens[k].0
            )));
        }
    }
    Ok(())
}

/// δ(T) = [|D|, T].
pub fn delta_derivation(triple: &SpectralTriple, t: &ComplexMatrix) -> Result<ComplexMatrix> {
    commutator(&triple.abs_dirac()?, t)
}

/// π_D(c) = Σ coeff·a⁰[D,a¹]…[D,aᵖ].
pub fn represent_chain(triple: &SpectralTriple, chain: &HochschildChain) -> Result<ComplexMatrix> {
    let n = triple.dim();
    let mut out = ComplexMatrix::zeros(n);
    for t in chain.terms() {
        let mut prod = triple.resolve(&t.factors[0])?.into_owned();
        for f in &t.factors[1..] {
            let a = triple.resolve(f)?;
            prod = prod.matmul(&triple.d(&a));
        }
        out.add_scaled(t.coefficient, &prod);
    }
    Ok(out)
}

/// Standard Hochschild boundary
/// b(a₀⊗…⊗a_p) = Σ_{i<p} (−1)ⁱ a₀⊗…⊗aᵢaᵢ₊₁⊗…⊗a_p + (−1)ᵖ a_p a₀⊗a₁⊗…⊗a_{p−1}.
pub fn hochschild_boundary(
    chain: &HochschildChain,
    triple: &SpectralTriple,
) -> Result<HochschildChain> {
    let p = chain.degree();
    if p == 0 {
        return Err(Error::Degree("boundary of a degree-0 chain".into()));
    }
    let mut terms = Vec::with_capacity(chain.terms().len() * (p + 1));
    for t in chain.terms() {
        for i in 0..p {
            let prod = triple
                .resolve(&t.factors[i])?
                .matmul(&*triple.resolve(&t.factors[i + 1])?);
            let mut factors = Vec::with_capacity(p);
            factors.extend(t.factors[..i].iter().cloned());
            factors.push(Factor::Matrix(prod));
            factors.extend(t.factors[i + 2..].iter().cloned());
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(ChainTerm {
                coefficient: t.coefficient * sign,
                factors,
            });
        }
        let wrap = triple
            .resolve(&t.factors[p])?
            .matmul(&*triple.resolve(&t.factors[0])?);
        let mut factors = Vec::with_capacity(p);
        factors.push(Factor::Matrix(wrap));
        factors.extend(t.factors[1..p].iter().cloned());
        let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
        terms.push(ChainTerm {
            coefficient: t.coefficient * sign,
            factors,
        });
    }
    HochschildChain::new(p - 1, terms)
}

/// Evaluates a state on an operator.
pub fn evaluate_state(
    triple: &SpectralTriple,
    state: &PointState,
    a: &ComplexMatrix,
) -> Result<C64> {
    match state {
        PointState::Point(label) => {
            let f = triple.require_fibres()?;
            let x = f.require(label)?;
            let idx = f.fibre(x);
            let s: C64 = idx.iter().map(|&j| a[(j, j)]).sum();
            Ok(s / idx.len() as f64)
        }
        PointState::Density(rho) => {
            rho.check_same_dim(a)?;
            Ok(rho.matmul(a).trace())
        }
    }
}

/// Checks that a density matrix is a state (positive, unit trace).
pub fn validate_density(rho: &ComplexMatrix, tol: f64) -> Result<()> {
    if rho.hermitian_defect() > tol {
        return Err(Error::Precondition("density is not hermitian".into()));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > tol {
        return Err(Error::Precondition(format!("density has trace {tr}")));
    }
    let min = rho.eigvalsh()?.first().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::Precondition(format!(
            "density has eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(m: f64) -> SpectralTriple {
        let d = ComplexMatrix::from_fn(2, |i, j| if i != j { c64(m, 0.0) } else { ZERO });
        let mut parts = TripleParts::new("two", d);
        parts.generators = vec![
            ("p".into(), ComplexMatrix::from_real_diagonal(&[1.0, 0.0])),
            ("q".into(), ComplexMatrix::from_real_diagonal(&[0.0, 1.0])),
        ];
        SpectralTriple::new(parts).unwrap()
    }

    #[test]
    fn degree_one_chain_is_a_times_da() {
        let t = two_point(1.5);
        let c = HochschildChain::monomial(ONE, &["p", "q"]).unwrap();
        let r = represent_chain(&t, &c).unwrap();
        let direct = t
            .generator("p")
            .unwrap()
            .matmul(&t.d(t.generator("q").unwrap()));
        assert_eq!(r, direct);
    }

    #[test]
    fn boundary_of_degree_zero_fails() {
        let t = two_point(1.0);
        let c = HochschildChain::monomial(ONE, &["p"]).unwrap();
        assert!(hochschild_boundary(&c, &t).is_err());
    }

    #[test]
    fn delta_vanishes_when_abs_d_is_scalar() {
        let t = two_point(2.0);
        let r = delta_derivation(&t, t.generator("p").unwrap()).unwrap();
        assert!(r.max_abs() < 1e-12);
    }

    #[test]
    fn fibre_partition_must_cover() {
        let pts = vec![SamplePoint {
            label: "a".into(),
            coords: vec![],
        }];
        assert!(FibreDecomposition::new(pts, vec![vec![0]], 2).is_err());
    }

    #[test]
    fn non_closed_generators_are_rejected() {
        let d = ComplexMatrix::zeros(2);
        let mut parts = TripleParts::new("bad", d);
        let mut u = ComplexMatrix::zeros(2);
        u[(0, 1)] = ONE;
        parts.generators = vec![("u".into(), u)];
        assert!(SpectralTriple::new(parts).is_err());
    }
}
