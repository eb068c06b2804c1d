//! Reconstruction of pointwise geometry from the triple: charts from the
//! orientation cycle, Gram and metric fields, one-form expansions,
//! transition functions, the Dirac formula and the chirality element.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::axioms::AxiomVerdict;
use crate::calculus::{coordinate_symbols, gram_at, pseudo_inverse_checked};
use crate::error::{Error, Result};
use crate::linalg::{c64, dmatrix_norm, ComplexMatrix, C64, I, ZERO};
use crate::par;
use crate::triple::{ChartHint, Factor, SpectralTriple};

/// Relative singular-value cut for pointwise linear independence.
pub const RANK_TOL: f64 = 1e-6;
/// Default interior-mode mask width.
pub const DEFAULT_MASK: usize = 2;

/// A local chart: coordinates a¹…a^m, an optional weight a⁰ from the
/// cycle, and the point labels of its domain.
#[derive(Clone, Debug, Serialize)]
pub struct Chart {
    pub label: String,
    pub names: Vec<String>,
    #[serde(skip)]
    pub coordinates: Vec<Factor>,
    /// Σ coeff·sign·a⁰ over the cycle terms that share these coordinates.
    #[serde(skip)]
    pub weight: Option<ComplexMatrix>,
    pub domain: Vec<String>,
}

impl Chart {
    /// A chart on named generators with the given domain.
    pub fn on_generators(label: &str, names: &[&str], domain: Vec<String>) -> Self {
        Self {
            label: label.into(),
            names: names.iter().map(|s| s.to_string()).collect(),
            coordinates: names.iter().map(|n| Factor::named(n)).collect(),
            weight: None,
            domain,
        }
    }

    pub fn coordinate_matrices(&self, triple: &SpectralTriple) -> Result<Vec<ComplexMatrix>> {
        self.coordinates
            .iter()
            .map(|f| triple.resolve(f).map(|m| m.into_owned()))
            .collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.domain.iter().any(|d| d == label)
    }

    /// Number of coordinate functions.
    pub fn arity(&self) -> usize {
        self.coordinates.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartAtlas {
    pub charts: Vec<Chart>,
    /// Every sample point lies in some domain.
    pub complete: bool,
    pub uncovered: Vec<String>,
}

impl ChartAtlas {
    pub fn chart(&self, label: &str) -> Result<&Chart> {
        self.charts
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Precondition(format!("no chart labelled `{label}`")))
    }
}

fn ser_mats<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Vec<f64>>> = ms
        .iter()
        .map(|m| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        })
        .collect();
    rows.serialize(s)
}

/// Pointwise Gram matrices g^{jk}(x) of one chart.
#[derive(Clone, Debug, Serialize)]
pub struct MetricField {
    pub chart: String,
    pub points: Vec<String>,
    #[serde(serialize_with = "ser_mats")]
    pub matrices: Vec<DMatrix<f64>>,
    /// Smallest eigenvalue at each point.
    pub min_eigenvalues: Vec<f64>,
}

impl MetricField {
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.min_eigenvalues.iter().all(|&l| l > tol)
    }

    pub fn at(&self, label: &str) -> Option<&DMatrix<f64>> {
        self.points
            .iter()
            .position(|p| p == label)
            .map(|i| &self.matrices[i])
    }
}

/// Γ′ as a global operator and, with fibres, per point.
#[derive(Clone, Debug, Serialize)]
pub struct OrientationSection {
    #[serde(skip)]
    pub global: ComplexMatrix,
    pub points: Vec<String>,
    #[serde(skip)]
    pub blocks: Vec<DMatrix<C64>>,
    pub block_norms: Vec<f64>,
    pub hermitian_defect: f64,
}

/// Signed permutations of 0..p.
fn permutations(p: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; p], &mut out);
    out.into_iter()
        .map(|perm| {
            let mut inv = 0;
            for i in 0..p {
                for j in i + 1..p {
                    if perm[i] > perm[j] {
                        inv += 1;
                    }
                }
            }
            let s = if inv % 2 == 0 { 1.0 } else { -1.0 };
            (perm, s)
        })
        .collect()
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|k| k as f64).product()
}

/// (1/p!) Σ_σ sgn σ X_σ(1)…X_σ(p) for small blocks.
pub fn skew_product(xs: &[DMatrix<C64>]) -> DMatrix<C64> {
    let n = xs.first().map_or(0, |x| x.nrows());
    let mut out = DMatrix::from_element(n, n, ZERO);
    for (perm, s) in permutations(xs.len()) {
        let mut prod = DMatrix::identity(n, n);
        for &k in &perm {
            prod *= &xs[k];
        }
        out += prod * c64(s, 0.0);
    }
    out / c64(factorial(xs.len()), 0.0)
}

fn skew_product_global(xs: &[ComplexMatrix], dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim);
    for (perm, s) in permutations(xs.len()) {
        let mut prod = ComplexMatrix::identity(dim);
        for &k in &perm {
            prod = prod.matmul(&xs[k]);
        }
        out.add_scaled(c64(s, 0.0), &prod);
    }
    out.scale_real(1.0 / factorial(xs.len()))
}

/// Γ′ = (1/p!) Σ_σ (−1)^σ Σ_α a⁰_α da^{σ(1)}_α … da^{σ(p)}_α.
pub fn orientation_section(triple: &SpectralTriple) -> Result<OrientationSection> {
    let cycle = triple
        .cycle()
        .ok_or_else(|| Error::Missing("triple carries no Hochschild cycle".into()))?;
    let dim = triple.dim();
    let mut global = ComplexMatrix::zeros(dim);
    let mut blocks: Vec<DMatrix<C64>> = Vec::new();
    let fib = triple.fibres();
    for t in cycle.terms() {
        let a0 = triple.resolve(&t.factors[0])?;
        let ds: Vec<ComplexMatrix> = t.factors[1..]
            .iter()
            .map(|f| triple.resolve(f).map(|a| triple.d(&a)))
            .collect::<Result<_>>()?;
        let skew = if ds.is_empty() {
            ComplexMatrix::identity(dim)
        } else {
            skew_product_global(&ds, dim)
        };
        global.add_scaled(t.coefficient, &a0.matmul(&skew));
        if let Some(fib) = fib {
            let a0v = fib.point_values(&a0);
            let syms: Vec<Vec<DMatrix<C64>>> = ds.iter().map(|d| fib.symbols(d)).collect();
            let local = par::map_range(fib.len(), |x| {
                let xs: Vec<DMatrix<C64>> = syms.iter().map(|s| s[x].clone()).collect();
                let n = fib.fibre(x).len();
                let sk = if xs.is_empty() {
                    DMatrix::identity(n, n)
                } else {
                    skew_product(&xs)
                };
                sk * (t.coefficient * a0v[x])
            });
            if blocks.is_empty() {
                blocks = local;
            } else {
                for (b, l) in blocks.iter_mut().zip(local) {
                    *b += l;
                }
            }
        }
    }
    let points = fib.map_or(Vec::new(), |f| {
        f.points().iter().map(|p| p.label.clone()).collect()
    });
    let block_norms = blocks.iter().map(dmatrix_norm).collect();
    let hermitian_defect = global.hermitian_defect();
    Ok(OrientationSection {
        global,
        points,
        blocks,
        block_norms,
        hermitian_defect,
    })
}

/// Charts from the atlas hint when given, else from the cycle terms.
///
/// Cycle terms with the same set of coordinate factors form one chart; the
/// first term fixes the coordinate order and the others contribute their
/// a⁰ with the sign of the reordering. A point belongs to a chart when the
/// symbols of its coordinate differentials have full rank there and, for
/// cycle charts, the weight a⁰ does not vanish.
pub fn chart_domains(triple: &SpectralTriple, hint: Option<&[ChartHint]>) -> Result<ChartAtlas> {
    let fib = triple.require_fibres()?;
    let p = triple.claimed_dimension();
    let raw: Vec<Chart> = match hint {
        Some(h) => h
            .iter()
            .map(|c| Chart {
                label: c.label.clone(),
                names: c.names.clone(),
                coordinates: c.coordinates.clone(),
                weight: None,
                domain: c
                    .domain
                    .clone()
                    .unwrap_or_else(|| fib.points().iter().map(|p| p.label.clone()).collect()),
            })
            .collect(),
        None => charts_from_cycle(triple)?,
    };
    if raw.is_empty() {
        return Err(Error::Precondition(
            "no charts: the cycle has no usable terms".into(),
        ));
    }
    let mut charts = Vec::with_capacity(raw.len());
    for mut chart in raw {
        let coords = chart.coordinate_matrices(triple)?;
        let syms = coordinate_symbols(triple, &coords);
        let m = coords.len();
        let need = p.map_or(m, |p| m.min(p));
        let svs: Vec<Vec<f64>> = par::map_range(fib.len(), |x| {
            let n = fib.fibre(x).len();
            let a = DMatrix::from_fn(n * n, m, |r, j| syms[j][x][(r / n, r % n)]);
            let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            s
        });
        let smax = svs
            .iter()
            .flat_map(|s| s.first().copied())
            .fold(0.0, f64::max);
        let weight_vals = chart.weight.as_ref().map(|w| fib.point_values(w));
        let wmax = weight_vals
            .as_ref()
            .map_or(0.0, |w| w.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let keep: Vec<String> = fib
            .points()
            .iter()
            .enumerate()
            .filter(|(x, pt)| {
                let ranked = smax > 0.0
                    && svs[*x].len() >= need
                    && (need == 0 || svs[*x][need - 1] > RANK_TOL * smax);
                let weighted = weight_vals
                    .as_ref()
                    .is_none_or(|w| w[*x].norm() > RANK_TOL * wmax);
                ranked && weighted && chart.contains(&pt.label)
            })
            .map(|(_, pt)| pt.label.clone())
            .collect();
        chart.domain = keep;
        charts.push(chart);
    }
    if charts.iter().all(|c| c.domain.is_empty()) {
        return Err(Error::Precondition(
            "every chart domain is empty (degenerate cycle)".into(),
        ));
    }
    let uncovered: Vec<String> = fib
        .points()
        .iter()
        .filter(|pt| !charts.iter().any(|c| c.contains(&pt.label)))
        .map(|pt| pt.label.clone())
        .collect();
    Ok(ChartAtlas {
        complete: uncovered.is_empty(),
        uncovered,
        charts,
    })
}

/// Atlas from the triple's own hint, falling back to the cycle.
pub fn default_atlas(triple: &SpectralTriple) -> Result<ChartAtlas> {
    chart_domains(triple, triple.atlas_hint())
}

fn factor_name(f: &Factor, k: usize) -> String {
    match f {
        Factor::Generator(n) => n.clone(),
        Factor::Matrix(_) => format!("m{k}"),
    }
}

fn charts_from_cycle(triple: &SpectralTriple) -> Result<Vec<Chart>> {
    let cycle = triple
        .cycle()
        .ok_or_else(|| Error::Missing("triple carries no Hochschild cycle".into()))?;
    if cycle.degree() == 0 {
        return Err(Error::Degree(
            "charts need a cycle of positive degree".into(),
        ));
    }
    // distinct coordinate factors, numbered by first appearance
    let mut seen: Vec<Factor> = Vec::new();
    let mut id = |f: &Factor| -> usize {
        match seen.iter().position(|g| g == f) {
            Some(i) => i,
            None => {
                seen.push(f.clone());
                seen.len() - 1
            }
        }
    };
    struct Group {
        ids: Vec<usize>,
        coordinates: Vec<Factor>,
        weight: ComplexMatrix,
    }
    let mut groups: Vec<Group> = Vec::new();
    for t in cycle.terms() {
        if t.coefficient == ZERO {
            continue;
        }
        let ids: Vec<usize> = t.factors[1..].iter().map(&mut id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            // repeated one-form: skewsymmetrizes to zero
            continue;
        }
        let a0 = triple.resolve(&t.factors[0])?.scale(t.coefficient);
        match groups.iter_mut().find(|g| {
            let mut s = g.ids.clone();
            s.sort_unstable();
            s == sorted
        }) {
            Some(g) => {
                // sign of the permutation taking g.ids to ids
                let perm: Vec<usize> = ids
                    .iter()
                    .map(|i| g.ids.iter().position(|j| j == i).unwrap())
                    .collect();
                let mut inv = 0;
                for i in 0..perm.len() {
                    for j in i + 1..perm.len() {
                        if perm[i] > perm[j] {
                            inv += 1;
                        }
                    }
                }
                let s = if inv % 2 == 0 { 1.0 } else { -1.0 };
                g.weight.add_scaled(c64(s, 0.0), &a0);
            }
            None => groups.push(Group {
                ids,
                coordinates: t.factors[1..].to_vec(),
                weight: a0,
            }),
        }
    }
    let mut charts = Vec::new();
    for g in groups {
        if g.weight.is_zero() {
            continue;
        }
        let names: Vec<String> = g
            .coordinates
            .iter()
            .zip(&g.ids)
            .map(|(f, &k)| factor_name(f, k))
            .collect();
        let mut label = names.join(",");
        if charts.iter().any(|c: &Chart| c.label == label) {
            label = format!("{label}#{}", charts.len());
        }
        charts.push(Chart {
            label,
            names,
            coordinates: g.coordinates,
            weight: Some(g.weight),
            domain: Vec::new(),
        });
    }
    // domains are filled in by the rank test; start from every point
    let all: Vec<String> = triple
        .require_fibres()?
        .points()
        .iter()
        .map(|p| p.label.clone())
        .collect();
    for c in charts.iter_mut() {
        c.domain = all.clone();
    }
    Ok(charts)
}

/// g^{jk}_α(x) = −(1/N) tr(da^j_α(x) da^k_α(x)) on the chart domain.
pub fn gram_matrix_field(
    triple: &SpectralTriple,
    atlas: &ChartAtlas,
    alpha: &str,
) -> Result<MetricField> {
    let fib = triple.require_fibres()?;
    let chart = atlas.chart(alpha)?;
    let coords = chart.coordinate_matrices(triple)?;
    let syms = coordinate_symbols(triple, &coords);
    let xs: Vec<usize> = chart
        .domain
        .iter()
        .map(|l| fib.require(l))
        .collect::<Result<_>>()?;
    let matrices: Vec<DMatrix<f64>> = par::map_slice(&xs, |&x| gram_at(&syms, x));
    let min_eigenvalues = matrices
        .iter()
        .map(|g| {
            g.clone()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(MetricField {
        chart: alpha.into(),
        points: chart.domain.clone(),
        matrices,
        min_eigenvalues,
    })
}

/// Scalar part and non-scalar residual of the anticommutator at each point.
#[derive(Clone, Debug, Serialize)]
pub struct MetricValues {
    pub points: Vec<String>,
    /// g(da, db)(x) = −(1/2N) tr σ_x([D,a][D,b] + [D,b][D,a]).
    pub values: Vec<f64>,
    /// ‖σ_x − scalar·1‖ (operator norm).
    pub residuals: Vec<f64>,
}

impl MetricValues {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn metric_field(
    triple: &SpectralTriple,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<MetricValues> {
    let fib = triple.require_fibres()?;
    a.check_same_dim(b)?;
    let (da, db) = (triple.d(a), triple.d(b));
    let anti = &da.matmul(&db) + &db.matmul(&da);
    let out = par::map_range(fib.len(), |x| {
        let s = fib.symbol(&anti, x);
        let n = s.nrows();
        let tr = s.trace();
        let scalar = -tr.re / (2.0 * n as f64);
        let defect = &s - DMatrix::<C64>::identity(n, n) * (tr / n as f64);
        (scalar, dmatrix_norm(&defect))
    });
    Ok(MetricValues {
        points: fib.points().iter().map(|p| p.label.clone()).collect(),
        values: out.iter().map(|v| v.0).collect(),
        residuals: out.iter().map(|v| v.1).collect(),
    })
}

/// da = Σ_j c_j(x) da^j_α(x) on the chart domain.
#[derive(Clone, Debug, Serialize)]
pub struct OneFormExpansion {
    pub chart: String,
    pub points: Vec<String>,
    pub coefficients: Vec<Vec<C64>>,
    /// Operator norm of the fibre row block of da − Σ c_j(x) da^j.
    pub residuals: Vec<f64>,
}

impl OneFormExpansion {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Least-squares coefficients of one symbol in the span of others:
/// min-norm when the basis is redundant.
fn symbol_coefficients(basis: &[&DMatrix<C64>], target: &DMatrix<C64>) -> Result<Vec<C64>> {
    let n = target.nrows();
    let m = basis.len();
    let a = DMatrix::from_fn(n * n, m, |r, j| basis[j][(r / n, r % n)]);
    let b = DVector::from_fn(n * n, |r, _| target[(r / n, r % n)]);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Err(Error::Precondition("vanishing basis of one-forms".into()));
    }
    let c = svd
        .solve(&b, 1e-10 * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(c.iter().copied().collect())
}

pub fn expand_one_form(
    triple: &SpectralTriple,
    atlas: &ChartAtlas,
    alpha: &str,
    a: &ComplexMatrix,
) -> Result<OneFormExpansion> {
    let fib = triple.require_fibres()?;
    let chart = atlas.chart(alpha)?;
    let coords = chart.coordinate_matrices(triple)?;
    let dcoords: Vec<ComplexMatrix> = coords.iter().map(|c| triple.d(c)).collect();
    let syms = coordinate_symbols(triple, &coords);
    let da = triple.d(a);
    let xs: Vec<usize> = chart
        .domain
        .iter()
        .map(|l| fib.require(l))
        .collect::<Result<_>>()?;
    let dim = triple.dim();
    let rows = par::map_slice(&xs, |&x| -> Result<(Vec<C64>, f64)> {
        let basis: Vec<&DMatrix<C64>> = syms.iter().map(|s| &s[x]).collect();
        let g = gram_at(&syms, x);
        if pseudo_inverse_checked(&g).is_none() {
            return Err(Error::Precondition(format!(
                "Gram matrix vanishes at `{}`",
                fib.points()[x].label
            )));
        }
        let c = symbol_coefficients(&basis, &fib.symbol(&da, x))?;
        let f = fib.fibre(x);
        let block = DMatrix::from_fn(f.len(), dim, |r, col| {
            let i = f[r];
            let mut v = da[(i, col)];
            for (cj, dj) in c.iter().zip(&dcoords) {
                v -= cj * dj[(i, col)];
            }
            v
        });
        Ok((c, dmatrix_norm(&block)))
    });
    let mut coefficients = Vec::with_capacity(xs.len());
    let mut residuals = Vec::with_capacity(xs.len());
    for r in rows {
        let (c, res) = r?;
        coefficients.push(c);
        residuals.push(res);
    }
    Ok(OneFormExpansion {
        chart: alpha.into(),
        points: chart.domain.clone(),
        coefficients,
        residuals,
    })
}

/// Transition matrices c_{αβ}(x) with da^k_α = Σ_j c_{αβ}[k, j] da^j_β.
#[derive(Clone, Debug, Serialize)]
pub struct Transition {
    pub alpha: String,
    pub beta: String,
    pub points: Vec<String>,
    #[serde(serialize_with = "ser_mats")]
    pub matrices: Vec<DMatrix<f64>>,
    /// Largest imaginary part discarded from the coefficients.
    pub max_imaginary: f64,
    /// max ‖c_{αβ}c_{βγ} − c_{αγ}‖ over the triple overlap, when a third chart is given.
    pub cocycle_residual: Option<f64>,
}

fn transition_matrices(
    triple: &SpectralTriple,
    a: &Chart,
    b: &Chart,
    points: &[usize],
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let ca = a.coordinate_matrices(triple)?;
    let cb = b.coordinate_matrices(triple)?;
    let sa = coordinate_symbols(triple, &ca);
    let sb = coordinate_symbols(triple, &cb);
    // coordinates shared verbatim map to unit rows
    let same: Vec<Option<usize>> = ca
        .iter()
        .map(|x| {
            cb.iter()
                .position(|y| (x - y).max_abs() <= 1e-14 * x.max_abs().max(1.0))
        })
        .collect();
    let out = par::map_slice(points, |&x| -> Result<(DMatrix<f64>, f64)> {
        let basis: Vec<&DMatrix<C64>> = sb.iter().map(|s| &s[x]).collect();
        let mut m = DMatrix::zeros(ca.len(), cb.len());
        let mut imag: f64 = 0.0;
        for k in 0..ca.len() {
            match same[k] {
                Some(j) => m[(k, j)] = 1.0,
                None => {
                    let c = symbol_coefficients(&basis, &sa[k][x])?;
                    for (j, z) in c.iter().enumerate() {
                        m[(k, j)] = z.re;
                        imag = imag.max(z.im.abs());
                    }
                }
            }
        }
        Ok((m, imag))
    });
    let mut mats = Vec::with_capacity(points.len());
    let mut imag: f64 = 0.0;
    for r in out {
        let (m, i) = r?;
        mats.push(m);
        imag = imag.max(i);
    }
    Ok((mats, imag))
}

pub fn transition_cocycle(
    triple: &SpectralTriple,
    atlas: &ChartAtlas,
    alpha: &str,
    beta: &str,
    gamma: Option<&str>,
) -> Result<Transition> {
    let fib = triple.require_fibres()?;
    let (a, b) = (atlas.chart(alpha)?, atlas.chart(beta)?);
    let overlap: Vec<String> = a.domain.iter().filter(|l| b.contains(l)).cloned().collect();
    if overlap.is_empty() {
        return Err(Error::Precondition(format!(
            "charts `{alpha}` and `{beta}` do not overlap"
        )));
    }
    let xs: Vec<usize> = overlap
        .iter()
        .map(|l| fib.require(l))
        .collect::<Result<_>>()?;
    let (matrices, max_imaginary) = transition_matrices(triple, a, b, &xs)?;
    let cocycle_residual = match gamma {
        None => None,
        Some(g) => {
            let c = atlas.chart(g)?;
            let idx: Vec<usize> = (0..xs.len()).filter(|&i| c.contains(&overlap[i])).collect();
            let triple_pts: Vec<usize> = idx.iter().map(|&i| xs[i]).collect();
            if triple_pts.is_empty() {
                return Err(Error::Precondition(
                    "the three charts have no common point".into(),
                ));
            }
            let (bc, _) = transition_matrices(triple, b, c, &triple_pts)?;
            let (ac, _) = transition_matrices(triple, a, c, &triple_pts)?;
            let worst = idx
                .iter()
                .enumerate()
                .map(|(t, &i)| (&matrices[i] * &bc[t] - &ac[t]).amax())
                .fold(0.0, f64::max);
            Some(worst)
        }
    };
    Ok(Transition {
        alpha: alpha.into(),
        beta: beta.into(),
        points: overlap,
        matrices,
        max_imaginary,
        cocycle_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiracReconstruction {
    #[serde(skip)]
    pub reconstructed: ComplexMatrix,
    /// ‖reconstructed − D‖ on interior modes.
    pub deviation: f64,
    pub mask_width: usize,
}

/// D = ½(−1)^{p−1}Γ Σ_α Σ_j (−1)^{j−1} a⁰ da¹…[D²,a^j]…daᵖ + ½(−1)^{p−1}Γ dΓ,
/// with dΓ = Σ_α da⁰ da¹…daᵖ.
pub fn reconstruct_dirac(triple: &SpectralTriple) -> Result<DiracReconstruction> {
    reconstruct_dirac_masked(triple, DEFAULT_MASK)
}

pub fn reconstruct_dirac_masked(
    triple: &SpectralTriple,
    width: usize,
) -> Result<DiracReconstruction> {
    let cycle = triple
        .cycle()
        .ok_or_else(|| Error::Missing("triple carries no Hochschild cycle".into()))?;
    let p = cycle.degree();
    if p == 0 {
        return Err(Error::Degree("the Dirac formula needs p ≥ 1".into()));
    }
    let dim = triple.dim();
    let d = triple.dirac();
    let d2 = d.matmul(d);
    let mut sum = ComplexMatrix::zeros(dim);
    let mut dgamma = ComplexMatrix::zeros(dim);
    for t in cycle.terms() {
        let fs: Vec<ComplexMatrix> = t
            .factors
            .iter()
            .map(|f| triple.resolve(f).map(|m| m.into_owned()))
            .collect::<Result<_>>()?;
        let ds: Vec<ComplexMatrix> = fs[1..].iter().map(|a| triple.d(a)).collect();
        for j in 0..p {
            let mut prod = fs[0].clone();
            for (k, dk) in ds.iter().enumerate() {
                if k == j {
                    let c2 = &d2.matmul(&fs[k + 1]) - &fs[k + 1].matmul(&d2);
                    prod = prod.matmul(&c2);
                } else {
                    prod = prod.matmul(dk);
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum.add_scaled(t.coefficient * sign, &prod);
        }
        let mut dg = triple.d(&fs[0]);
        for dk in &ds {
            dg = dg.matmul(dk);
        }
        dgamma.add_scaled(t.coefficient, &dg);
    }
    let gamma = triple.grading_or_identity();
    let pre = if p % 2 == 1 { 0.5 } else { -0.5 };
    let rec = gamma.matmul(&(&sum + &dgamma)).scale_real(pre);
    let deviation = triple.interior_mask(width).norm(&(&rec - d));
    Ok(DiracReconstruction {
        reconstructed: rec,
        deviation,
        mask_width: width,
    })
}

/// Per-chart comparison of i^m √det g · da¹…daᵖ (skewsymmetrized) with Γ,
/// with a global sign f = ±1 chosen to minimize the worst deviation.
///
/// m = ⌊(p+1)/2⌋. A cycle chart contributes with the sign of Re(i^{−m} a⁰)
/// at each point. Fibre models without an atlas use the default one; without
/// fibres the global section Γ′ is compared with Γ on interior modes.
pub fn chirality_check(
    triple: &SpectralTriple,
    atlas: Option<&ChartAtlas>,
    tol: f64,
) -> Result<AxiomVerdict> {
    let name = "chirality";
    let p = triple
        .claimed_dimension()
        .or_else(|| triple.cycle().map(|c| c.degree()))
        .ok_or_else(|| Error::Missing("no claimed dimension".into()))?;
    let m = p.div_ceil(2) as i32;
    let im = I.powi(m);
    let gamma = triple.grading_or_identity();
    // fibre models without an explicit atlas use their default one
    let fallback = match (triple.fibres(), atlas) {
        (Some(_), None) => default_atlas(triple).ok(),
        _ => None,
    };
    let atlas = atlas.or(fallback.as_ref());
    let (plus, minus, detail) = match (triple.fibres(), atlas) {
        (Some(fib), Some(atlas)) => {
            let mut plus: f64 = 0.0;
            let mut minus: f64 = 0.0;
            let mut used = 0;
            let mut npts = 0;
            for chart in &atlas.charts {
                if chart.arity() != p || chart.domain.is_empty() {
                    continue;
                }
                used += 1;
                let coords = chart.coordinate_matrices(triple)?;
                let syms = coordinate_symbols(triple, &coords);
                let wv = chart.weight.as_ref().map(|w| fib.point_values(w));
                let xs: Vec<usize> = chart
                    .domain
                    .iter()
                    .map(|l| fib.require(l))
                    .collect::<Result<_>>()?;
                npts += xs.len();
                let devs = par::map_slice(&xs, |&x| {
                    let g = gram_at(&syms, x);
                    let det = g.determinant();
                    let o = wv.as_ref().map_or(1.0, |w| {
                        if (w[x] * im.inv()).re >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    });
                    let xsyms: Vec<DMatrix<C64>> = syms.iter().map(|s| s[x].clone()).collect();
                    let local = skew_product(&xsyms) * (im * (o / det.abs().sqrt()));
                    let gx = fib.diagonal_block(&gamma, x);
                    (dmatrix_norm(&(&local - &gx)), dmatrix_norm(&(&local + &gx)))
                });
                for (a, b) in devs {
                    plus = plus.max(a);
                    minus = minus.max(b);
                }
            }
            if used == 0 {
                return Ok(AxiomVerdict::inconclusive(
                    name,
                    tol,
                    "no chart with exactly p coordinates",
                ));
            }
            (plus, minus, format!("{used} charts, {npts} chart points"))
        }
        _ => {
            let sec = orientation_section(triple)?;
            let mask = triple.interior_mask(DEFAULT_MASK);
            let plus = mask.norm(&(&sec.global - &gamma));
            let minus = mask.norm(&(&sec.global + &gamma));
            (plus, minus, "global section on interior modes".to_string())
        }
    };
    let (residual, f) = if plus <= minus {
        (plus, 1)
    } else {
        (minus, -1)
    };
    let mut v = AxiomVerdict::new(name, residual, tol, format!("sign f = {f:+}; {detail}"));
    v.metrics.insert("sign".into(), f as f64);
    v.metrics.insert("residual_plus".into(), plus);
    v.metrics.insert("residual_minus".into(), minus);
    Ok(v)
}

/// n_α(x) = #{y ∈ U_α : |a_α(y) − a_α(x)| ≤ r}.
///
/// The default radius is half the smallest nonzero coordinate spacing in
/// the domain.
pub fn multiplicity_probe(
    triple: &SpectralTriple,
    chart: &Chart,
    radius: Option<f64>,
) -> Result<Vec<(String, usize)>> {
    if chart.domain.is_empty() {
        return Ok(Vec::new());
    }
    let fib = triple.require_fibres()?;
    let coords = chart.coordinate_matrices(triple)?;
    let vals: Vec<Vec<C64>> = coords.iter().map(|c| fib.point_values(c)).collect();
    let xs: Vec<usize> = chart
        .domain
        .iter()
        .map(|l| fib.require(l))
        .collect::<Result<_>>()?;
    let pt = |x: usize| -> Vec<C64> { vals.iter().map(|v| v[x]).collect() };
    let dist = |x: usize, y: usize| -> f64 {
        pt(x)
            .iter()
            .zip(pt(y))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let scale = xs
        .iter()
        .flat_map(|&x| pt(x).into_iter().map(|z| z.norm()))
        .fold(0.0, f64::max)
        .max(1e-300);
    let r = match radius {
        Some(r) => r,
        None => {
            let mut min = f64::INFINITY;
            for (i, &x) in xs.iter().enumerate() {
                for &y in &xs[i + 1..] {
                    let d = dist(x, y);
                    if d > 1e-9 * scale {
                        min = min.min(d);
                    }
                }
            }
            if min.is_finite() {
                0.5 * min
            } else {
                1e-9 * scale
            }
        }
    };
    Ok(par::map_slice(&xs, |&x| {
        let n = xs.iter().filter(|&&y| dist(x, y) <= r).count();
        (fib.points()[x].label.clone(), n)
    }))
}

/// Per-chart numbers of a [`GeometryReport`].
#[derive(Clone, Debug, Serialize)]
pub struct ChartSummary {
    pub label: String,
    pub names: Vec<String>,
    pub domain_size: usize,
    /// Smallest Gram eigenvalue over the domain.
    pub min_eigenvalue: f64,
    /// max_x ‖g(x) − 1‖_max, useful for flat models.
    pub identity_deviation: f64,
    /// Largest |Gram − metric_field| entry over the domain.
    pub formula_agreement: f64,
    /// Largest multiplicity n_α(x) over the domain.
    pub max_multiplicity: usize,
}

/// Everything the geometry command reports about one triple.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub triple: String,
    pub fingerprint: String,
    pub atlas_complete: bool,
    pub uncovered: Vec<String>,
    pub charts: Vec<ChartSummary>,
    pub metric_fields: Vec<MetricField>,
    pub chirality: AxiomVerdict,
    /// Sign f = ±1 chosen by the chirality check.
    pub chirality_sign: i8,
    pub dirac: Option<DiracReconstruction>,
    /// Steps that could not be evaluated, with the reason.
    pub notes: Vec<String>,
}

/// Atlas, Gram fields (cross-checked against the metric formula),
/// multiplicities, chirality and the Dirac formula for a fibred triple.
pub fn geometry_report(
    triple: &SpectralTriple,
    fingerprint: String,
    width: usize,
    tol: f64,
) -> Result<GeometryReport> {
    let fib = triple.require_fibres()?;
    let atlas = default_atlas(triple)?;
    let mut charts = Vec::new();
    let mut fields = Vec::new();
    let mut notes = Vec::new();
    for chart in &atlas.charts {
        if chart.domain.is_empty() {
            notes.push(format!("chart `{}` has an empty domain", chart.label));
            continue;
        }
        let field = gram_matrix_field(triple, &atlas, &chart.label)?;
        let coords = chart.coordinate_matrices(triple)?;
        let m = coords.len();
        let mut agreement: f64 = 0.0;
        for j in 0..m {
            for k in j..m {
                let mv = metric_field(triple, &coords[j], &coords[k])?;
                for (i, label) in field.points.iter().enumerate() {
                    let x = fib.require(label)?;
                    agreement = agreement.max((field.matrices[i][(j, k)] - mv.values[x]).abs());
                }
            }
        }
        let identity_deviation = field
            .matrices
            .iter()
            .map(|g| (g - DMatrix::identity(m, m)).amax())
            .fold(0.0, f64::max);
        let mult = multiplicity_probe(triple, chart, None)?;
        charts.push(ChartSummary {
            label: chart.label.clone(),
            names: chart.names.clone(),
            domain_size: chart.domain.len(),
            min_eigenvalue: field
                .min_eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            identity_deviation,
            formula_agreement: agreement,
            max_multiplicity: mult.iter().map(|(_, n)| *n).max().unwrap_or(0),
        });
        fields.push(field);
    }
    let chirality = chirality_check(triple, Some(&atlas), tol)?;
    let chirality_sign = if chirality.metrics.get("sign").copied().unwrap_or(1.0) < 0.0 {
        -1
    } else {
        1
    };
    let dirac = match reconstruct_dirac_masked(triple, width) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(format!("dirac reconstruction: {e}"));
            None
        }
    };
    Ok(GeometryReport {
        triple: triple.name().to_string(),
        fingerprint,
        atlas_complete: atlas.complete,
        uncovered: atlas.uncovered.clone(),
        charts,
        metric_fields: fields,
        chirality,
        chirality_sign,
        dirac,
        notes,
    })
}
