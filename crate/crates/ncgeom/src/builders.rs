//! Reference spectral triples.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, C64, I, ONE, ZERO};
use crate::triple::{
    ChainTerm, ChartHint, Factor, FibreDecomposition, HochschildChain, RealStructure, SamplePoint,
    SpectralTriple, TripleParts, VolumeForm,
};

/// Minimal two-point space: C² with D = [[0,m],[m,0]].
pub fn two_point(m: f64) -> Result<SpectralTriple> {
    if m == 0.0 || !m.is_finite() {
        return Err(Error::Precondition(
            "two-point mass must be finite and nonzero".into(),
        ));
    }
    let d = ComplexMatrix::from_fn(2, |i, j| if i != j { c64(m, 0.0) } else { ZERO });
    let mut parts = TripleParts::new("two_point", d);
    parts.generators = vec![
        ("e0".into(), ComplexMatrix::from_real_diagonal(&[1.0, 0.0])),
        ("e1".into(), ComplexMatrix::from_real_diagonal(&[0.0, 1.0])),
    ];
    parts.fibres = Some(FibreDecomposition::new(
        vec![
            SamplePoint {
                label: "x0".into(),
                coords: vec![0.0],
            },
            SamplePoint {
                label: "x1".into(),
                coords: vec![1.0],
            },
        ],
        vec![vec![0], vec![1]],
        2,
    )?);
    parts.commutative = true;
    SpectralTriple::new(parts)
}

/// Truncated circle in the Fourier basis e^{ikθ}, |k| ≤ n.
///
/// D = diag(k/r), generators `u` = e^{iθ} (the shift) and `u_dag`, cycle
/// r·U†⊗U, real structure k ↦ −k composed with conjugation, p = 1.
pub fn circle_fourier(n: usize, radius: f64) -> Result<SpectralTriple> {
    if n < 8 {
        return Err(Error::Precondition("circle_fourier needs n ≥ 8".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition("radius must be positive".into()));
    }
    let dim = 2 * n + 1;
    let k = |j: usize| j as f64 - n as f64;
    let d = ComplexMatrix::from_real_diagonal(&(0..dim).map(|j| k(j) / radius).collect::<Vec<_>>());
    let u = circle_shift(n);
    let flip = ComplexMatrix::from_fn(dim, |i, j| if i + j == dim - 1 { ONE } else { ZERO });
    let mut parts = TripleParts::new("circle_fourier", d);
    parts.generators = vec![("u".into(), u.clone()), ("u_dag".into(), u.adjoint())];
    parts.cycle = Some(HochschildChain::monomial(
        c64(radius, 0.0),
        &["u_dag", "u"],
    )?);
    parts.real_structure = Some(RealStructure {
        matrix: flip,
        conjugates: true,
    });
    parts.claimed_dimension = Some(1);
    parts.commutative = true;
    parts.volume = Some(VolumeForm::Fourier {
        zero_mode: n,
        total: 2.0 * PI * radius,
    });
    parts.boundary_distance = Some((0..dim).map(|j| n - k(j).abs() as usize).collect());
    SpectralTriple::new(parts)
}

/// The truncated shift e_k ↦ e_{k+1} on modes |k| ≤ n.
pub fn circle_shift(n: usize) -> ComplexMatrix {
    let dim = 2 * n + 1;
    ComplexMatrix::from_fn(dim, |i, j| if i == j + 1 { ONE } else { ZERO })
}

/// Per-cell tangent metric of a lattice in angle coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CellMetric {
    /// One p×p row-major matrix for every site.
    Constant(Vec<f64>),
    /// A p×p row-major matrix per site, sites in lattice order.
    PerSite(Vec<Vec<f64>>),
}

/// Which Hochschild cycle a lattice carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeCycle {
    /// Shuffle product of the circle cycles cos⊗sin − sin⊗cos; periodic
    /// and exact up to O(h²).
    Trigonometric,
    /// Angle coordinates themselves as inline factors; one chart covers
    /// everything but the chain is discontinuous across the seam.
    Coordinate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Sites per axis; the dimension p is `dims.len()`.
    pub dims: Vec<usize>,
    pub metric: CellMetric,
    pub cycle: LatticeCycle,
}

impl LatticeConfig {
    /// Circle of radius r: tangent metric r² in the angle coordinate.
    pub fn circle(n: usize, radius: f64) -> Self {
        Self {
            dims: vec![n],
            metric: CellMetric::Constant(vec![radius * radius]),
            cycle: LatticeCycle::Trigonometric,
        }
    }

    /// Flat torus (2π-periodic angles, identity metric).
    pub fn torus(n1: usize, n2: usize) -> Self {
        Self {
            dims: vec![n1, n2],
            metric: CellMetric::Constant(vec![1.0, 0.0, 0.0, 1.0]),
            cycle: LatticeCycle::Trigonometric,
        }
    }

    pub fn with_metric(mut self, metric: CellMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_cycle(mut self, cycle: LatticeCycle) -> Self {
        self.cycle = cycle;
        self
    }
}

/// Periodic lattice manifold (circle or 2-torus) with a symmetric-difference
/// Dirac operator D = −i Σ_a γ^a ⊗ ½(E^a_μ Δ_μ + Δ_μ E^a_μ), where E = G^{−1/2}
/// is the vielbein of the cell metric G and Δ_μ the central difference.
///
/// Conventions pinned by construction:
/// - the extracted cotangent metric g^{jk} in angle coordinates equals G⁻¹;
/// - Hilbert index = site·N + spinor slot, with N = 1 (p=1) or 2 (p=2);
/// - for p = 2, γ¹ = σ_x, γ² = σ_y and Γ = σ_z on every site;
/// - generators are `cos`, `sin` (p=1) or `cos1`, `sin1`, `cos2`, `sin2`.
pub fn lattice(config: &LatticeConfig) -> Result<SpectralTriple> {
    let p = config.dims.len();
    if !(1..=2).contains(&p) {
        return Err(Error::Precondition(
            "lattice dimension must be 1 or 2".into(),
        ));
    }
    if config.dims.iter().any(|&n| n < 8) {
        return Err(Error::Precondition(
            "lattice needs at least 8 sites per axis".into(),
        ));
    }
    let sites: usize = config.dims.iter().product();
    let spin = if p == 1 { 1 } else { 2 };
    let dim = sites * spin;
    let h: Vec<f64> = config.dims.iter().map(|&n| 2.0 * PI / n as f64).collect();

    let metrics = cell_metrics(&config.metric, p, sites)?;
    let vielbeins: Vec<DMatrix<f64>> = metrics.iter().map(inverse_sqrt).collect();

    // multi-index helpers, axis 0 slowest
    let coords_of = |s: usize| -> Vec<usize> {
        if p == 1 {
            vec![s]
        } else {
            vec![s / config.dims[1], s % config.dims[1]]
        }
    };
    let site_of = |c: &[usize]| -> usize {
        if p == 1 {
            c[0]
        } else {
            c[0] * config.dims[1] + c[1]
        }
    };
    let neighbour = |s: usize, mu: usize, step: isize| -> usize {
        let mut c = coords_of(s);
        let n = config.dims[mu] as isize;
        c[mu] = ((c[mu] as isize + step).rem_euclid(n)) as usize;
        site_of(&c)
    };

    // site operators S^a = Σ_μ ½(E^a_μ Δ_μ + Δ_μ E^a_μ), real antisymmetric
    let mut site_ops = vec![DMatrix::<f64>::zeros(sites, sites); p];
    for (a, op) in site_ops.iter_mut().enumerate() {
        for s in 0..sites {
            for mu in 0..p {
                let fwd = neighbour(s, mu, 1);
                let bwd = neighbour(s, mu, -1);
                let inv = 1.0 / (2.0 * h[mu]);
                // (EΔ + ΔE)/2 applied to δ_t: row s gets ½(E(s)+E(t))·Δ[s,t]
                let e_s = vielbeins[s][(a, mu)];
                op[(s, fwd)] += 0.5 * (e_s + vielbeins[fwd][(a, mu)]) * inv;
                op[(s, bwd)] -= 0.5 * (e_s + vielbeins[bwd][(a, mu)]) * inv;
            }
        }
    }
    let gammas = clifford(p);
    let mut d = ComplexMatrix::zeros(dim);
    for (a, op) in site_ops.iter().enumerate() {
        let g = &gammas[a];
        for s in 0..sites {
            for t in 0..sites {
                let v = op[(s, t)];
                if v == 0.0 {
                    continue;
                }
                for r in 0..spin {
                    for q in 0..spin {
                        d[(s * spin + r, t * spin + q)] += -I * g[(r, q)] * v;
                    }
                }
            }
        }
    }

    let angle = |s: usize, mu: usize| coords_of(s)[mu] as f64 * h[mu];
    let diag_fn = |f: &dyn Fn(usize) -> f64| -> ComplexMatrix {
        let v: Vec<f64> = (0..dim).map(|j| f(j / spin)).collect();
        ComplexMatrix::from_real_diagonal(&v)
    };
    let names: Vec<(String, String)> = if p == 1 {
        vec![("cos".into(), "sin".into())]
    } else {
        vec![
            ("cos1".into(), "sin1".into()),
            ("cos2".into(), "sin2".into()),
        ]
    };
    let mut generators = Vec::new();
    for (mu, (cn, sn)) in names.iter().enumerate() {
        generators.push((cn.clone(), diag_fn(&|s| angle(s, mu).cos())));
        generators.push((sn.clone(), diag_fn(&|s| angle(s, mu).sin())));
    }

    let points: Vec<SamplePoint> = (0..sites)
        .map(|s| {
            let c = coords_of(s);
            let label = if p == 1 {
                format!("s{}", c[0])
            } else {
                format!("s{}_{}", c[0], c[1])
            };
            SamplePoint {
                label,
                coords: (0..p).map(|mu| angle(s, mu)).collect(),
            }
        })
        .collect();
    let indices: Vec<Vec<usize>> = (0..sites)
        .map(|s| (0..spin).map(|r| s * spin + r).collect())
        .collect();
    let fibres = FibreDecomposition::new(points, indices, dim)?;

    let sqrt_det: Vec<f64> = metrics.iter().map(|g| g.determinant().sqrt()).collect();
    let volume: Vec<f64> = sqrt_det
        .iter()
        .map(|v| v * h.iter().product::<f64>())
        .collect();
    let constant_metric = matches!(config.metric, CellMetric::Constant(_));
    // √det G as a scalar coefficient or, for varying metrics, an inline a⁰ factor
    let density = diag_fn(&|s| sqrt_det[s]);

    let cycle = match config.cycle {
        LatticeCycle::Trigonometric => {
            let chis: Vec<[(f64, &str, &str); 2]> = names
                .iter()
                .map(|(c, s)| {
                    [
                        (1.0, c.as_str(), s.as_str()),
                        (-1.0, s.as_str(), c.as_str()),
                    ]
                })
                .collect();
            let mut terms = Vec::new();
            if p == 1 {
                for &(sg, a0, a1) in &chis[0] {
                    terms.push((sg, vec![a0.to_string()], vec![a1.to_string()]));
                }
            } else {
                // shuffle of a0⊗a1 with b0⊗b1: a0b0 ⊗ (a1⊗b1 − b1⊗a1)
                for &(s1, a0, a1) in &chis[0] {
                    for &(s2, b0, b1) in &chis[1] {
                        terms.push((
                            0.5 * s1 * s2,
                            vec![a0.to_string(), b0.to_string()],
                            vec![a1.to_string(), b1.to_string()],
                        ));
                        terms.push((
                            -0.5 * s1 * s2,
                            vec![a0.to_string(), b0.to_string()],
                            vec![b1.to_string(), a1.to_string()],
                        ));
                    }
                }
            }
            let gens = &generators;
            let lookup = |n: &str| {
                gens.iter()
                    .find(|(m, _)| m == n)
                    .map(|(_, g)| g.clone())
                    .unwrap()
            };
            let mut chain = Vec::new();
            for (sign, a0s, rest) in terms {
                let mut a0 = a0s
                    .iter()
                    .map(|n| lookup(n))
                    .reduce(|x, y| x.matmul(&y))
                    .unwrap();
                let coeff = if constant_metric {
                    c64(0.0, sign * sqrt_det[0])
                } else {
                    a0 = a0.matmul(&density);
                    c64(0.0, sign)
                };
                let mut factors = vec![if a0s.len() == 1 && constant_metric {
                    Factor::named(&a0s[0])
                } else {
                    Factor::Matrix(a0)
                }];
                factors.extend(rest.iter().map(|n| Factor::named(n)));
                chain.push(ChainTerm {
                    coefficient: coeff,
                    factors,
                });
            }
            HochschildChain::new(p, chain)?
        }
        LatticeCycle::Coordinate => {
            // ε_{μν} θ¹⊗θ² antisymmetrized; a⁰ carries √det G and the i-power
            let thetas: Vec<ComplexMatrix> = (0..p).map(|mu| diag_fn(&|s| angle(s, mu))).collect();
            let coeff = if p == 1 { I } else { c64(0.0, 0.5) };
            let mut chain = Vec::new();
            if p == 1 {
                chain.push(ChainTerm {
                    coefficient: coeff,
                    factors: vec![
                        Factor::Matrix(density.clone()),
                        Factor::Matrix(thetas[0].clone()),
                    ],
                });
            } else {
                for (sg, a, b) in [(1.0, 0, 1), (-1.0, 1, 0)] {
                    chain.push(ChainTerm {
                        coefficient: coeff * sg,
                        factors: vec![
                            Factor::Matrix(density.clone()),
                            Factor::Matrix(thetas[a].clone()),
                            Factor::Matrix(thetas[b].clone()),
                        ],
                    });
                }
            }
            HochschildChain::new(p, chain)?
        }
    };

    let grading = (p == 2).then(|| {
        let sz = sigma_z();
        ComplexMatrix::identity(sites).kron(&sz)
    });
    let real_structure = if p == 1 {
        RealStructure {
            matrix: ComplexMatrix::identity(dim),
            conjugates: true,
        }
    } else {
        let isy = ComplexMatrix::new(2, vec![ZERO, ONE, -ONE, ZERO])?;
        RealStructure {
            matrix: ComplexMatrix::identity(sites).kron(&isy),
            conjugates: true,
        }
    };

    let atlas_hint = angle_charts(&config.dims, &h, &fibres, dim, spin, &coords_of);

    let name = if p == 1 {
        "circle_lattice"
    } else {
        "torus_lattice"
    };
    let mut parts = TripleParts::new(name, d);
    parts.generators = generators;
    parts.grading = grading;
    parts.real_structure = Some(real_structure);
    parts.claimed_dimension = Some(p);
    parts.cycle = Some(cycle);
    parts.fibres = Some(fibres);
    parts.commutative = true;
    parts.volume = Some(VolumeForm::Weights(volume));
    parts.atlas_hint = Some(atlas_hint);
    SpectralTriple::new(parts)
}

/// Angle charts whose seams sit at 0 and π on each axis; domains stay two
/// sites clear of the seam.
fn angle_charts(
    dims: &[usize],
    h: &[f64],
    fibres: &FibreDecomposition,
    dim: usize,
    spin: usize,
    coords_of: &dyn Fn(usize) -> Vec<usize>,
) -> Vec<ChartHint> {
    let p = dims.len();
    let margin = 2usize;
    // shift 0 → seam at θ = 0, shift 1 → seam at θ = π
    // shift 0: θ ∈ [0, 2π); shift 1: θ ∈ [−π, π)
    let angle_in = |i: usize, mu: usize, shift: usize| -> f64 {
        let t = i as f64 * h[mu];
        if shift == 1 && 2 * i >= dims[mu] {
            t - 2.0 * PI
        } else {
            t
        }
    };
    let near_seam = |i: usize, mu: usize, shift: usize| -> bool {
        let n = dims[mu];
        let r = (i + n - shift * n / 2) % n;
        r < margin || r >= n - margin
    };
    let combos: Vec<Vec<usize>> = if p == 1 {
        vec![vec![0], vec![1]]
    } else {
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
    };
    combos
        .into_iter()
        .map(|shifts| {
            let coordinates: Vec<Factor> = (0..p)
                .map(|mu| {
                    let v: Vec<f64> = (0..dim)
                        .map(|j| angle_in(coords_of(j / spin)[mu], mu, shifts[mu]))
                        .collect();
                    Factor::Matrix(ComplexMatrix::from_real_diagonal(&v))
                })
                .collect();
            let domain: Vec<String> = fibres
                .points()
                .iter()
                .enumerate()
                .filter(|(s, _)| {
                    let c = coords_of(*s);
                    (0..p).all(|mu| !near_seam(c[mu], mu, shifts[mu]))
                })
                .map(|(_, pt)| pt.label.clone())
                .collect();
            let tag: String = shifts
                .iter()
                .map(|&s| if s == 0 { '0' } else { 'π' })
                .collect();
            ChartHint {
                label: format!("angle_{tag}"),
                coordinates,
                names: (1..=p).map(|mu| format!("theta{mu}")).collect(),
                domain: Some(domain),
            }
        })
        .collect()
}

fn cell_metrics(metric: &CellMetric, p: usize, sites: usize) -> Result<Vec<DMatrix<f64>>> {
    let to_mat = |v: &[f64]| -> Result<DMatrix<f64>> {
        if v.len() != p * p {
            return Err(Error::Precondition(format!(
                "cell metric needs {} entries",
                p * p
            )));
        }
        let g = DMatrix::from_row_slice(p, p, v);
        if (&g - g.transpose()).amax() > 1e-12 * g.amax() {
            return Err(Error::Precondition("cell metric is not symmetric".into()));
        }
        let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::Precondition(
                "cell metric is not positive definite".into(),
            ));
        }
        Ok(g)
    };
    match metric {
        CellMetric::Constant(v) => Ok(vec![to_mat(v)?; sites]),
        CellMetric::PerSite(all) => {
            if all.len() != sites {
                return Err(Error::Precondition(format!(
                    "{} cell metrics for {sites} sites",
                    all.len()
                )));
            }
            all.iter().map(|v| to_mat(v)).collect()
        }
    }
}

fn inverse_sqrt(g: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(g.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// Hermitian anticommuting generators γ^a, (γ^a)² = 1.
pub fn clifford(p: usize) -> Vec<ComplexMatrix> {
    match p {
        1 => vec![ComplexMatrix::identity(1)],
        _ => vec![
            ComplexMatrix::new(2, vec![ZERO, ONE, ONE, ZERO]).unwrap(),
            ComplexMatrix::new(2, vec![ZERO, -I, I, ZERO]).unwrap(),
        ],
    }
}

/// Fuzzy sphere of spin L/2: H = C^{L+1}⊗C², generators x_i = J_i/√(j(j+1))⊗1,
/// D = σ·J + 1. Noncommutative; used as a negative control.
pub fn fuzzy_sphere(l: usize) -> Result<SpectralTriple> {
    if l < 1 {
        return Err(Error::Precondition("fuzzy sphere needs L ≥ 1".into()));
    }
    let j = l as f64 / 2.0;
    let n = l + 1;
    let m = |a: usize| j - a as f64;
    // J+ |j,m⟩ = √(j(j+1) − m(m+1)) |j,m+1⟩, basis ordered m = j, j−1, …
    let jp = ComplexMatrix::from_fn(n, |r, c| {
        if c == r + 1 {
            let mm = m(c);
            c64((j * (j + 1.0) - mm * (mm + 1.0)).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let jm = jp.adjoint();
    let jx = (&jp + &jm).scale_real(0.5);
    let jy = (&jp - &jm).scale(c64(0.0, -0.5));
    let jz = ComplexMatrix::from_real_diagonal(&(0..n).map(m).collect::<Vec<_>>());
    let sig = [
        ComplexMatrix::new(2, vec![ZERO, ONE, ONE, ZERO])?,
        ComplexMatrix::new(2, vec![ZERO, -I, I, ZERO])?,
        sigma_z(),
    ];
    let js = [jx, jy, jz];
    let mut d = ComplexMatrix::identity(2 * n);
    for (ji, si) in js.iter().zip(sig.iter()) {
        d = &d + &ji.kron(si);
    }
    let norm = (j * (j + 1.0)).sqrt();
    let id2 = ComplexMatrix::identity(2);
    let mut parts = TripleParts::new("fuzzy_sphere", d);
    parts.generators = ["x1", "x2", "x3"]
        .iter()
        .zip(js.iter())
        .map(|(name, ji)| (name.to_string(), ji.scale_real(1.0 / norm).kron(&id2)))
        .collect();
    parts.claimed_dimension = Some(2);
    parts.commutative = false;
    SpectralTriple::new(parts)
}

/// Block direct sum of two triples. Generators are embedded as a⊕0 and
/// 0⊕b with names prefixed `l.`/`r.`, and the block indicators `block_l`,
/// `block_r` are added. Fibre labels get the same prefixes.
pub fn direct_sum(left: &SpectralTriple, right: &SpectralTriple) -> Result<SpectralTriple> {
    let (n1, n2) = (left.dim(), right.dim());
    let z1 = ComplexMatrix::zeros(n1);
    let z2 = ComplexMatrix::zeros(n2);
    let mut parts = TripleParts::new(
        &format!("{}+{}", left.name(), right.name()),
        left.dirac().direct_sum(right.dirac()),
    );
    for (name, g) in left.generators() {
        parts
            .generators
            .push((format!("l.{name}"), g.direct_sum(&z2)));
    }
    for (name, g) in right.generators() {
        parts
            .generators
            .push((format!("r.{name}"), z1.direct_sum(g)));
    }
    parts.generators.push((
        "block_l".into(),
        ComplexMatrix::identity(n1).direct_sum(&z2),
    ));
    parts.generators.push((
        "block_r".into(),
        z1.direct_sum(&ComplexMatrix::identity(n2)),
    ));
    parts.grading = match (left.grading(), right.grading()) {
        (Some(a), Some(b)) => Some(a.direct_sum(b)),
        _ => None,
    };
    if left.claimed_dimension() == right.claimed_dimension() {
        parts.claimed_dimension = left.claimed_dimension();
    }
    parts.commutative = left.is_commutative() && right.is_commutative();
    // an untruncated summand has no edge modes: treat it as infinitely far from the edge
    let (bl, br) = (
        &left.parts().boundary_distance,
        &right.parts().boundary_distance,
    );
    if bl.is_some() || br.is_some() {
        let side =
            |b: &Option<Vec<usize>>, n: usize| b.clone().unwrap_or_else(|| vec![usize::MAX; n]);
        let mut bd = side(bl, n1);
        bd.extend(side(br, n2));
        parts.boundary_distance = Some(bd);
    }
    if let (Some(a), Some(b)) = (left.fibres(), right.fibres()) {
        let mut points = Vec::new();
        let mut indices = Vec::new();
        for (x, pt) in a.points().iter().enumerate() {
            points.push(SamplePoint {
                label: format!("l.{}", pt.label),
                coords: pt.coords.clone(),
            });
            indices.push(a.fibre(x).to_vec());
        }
        for (x, pt) in b.points().iter().enumerate() {
            points.push(SamplePoint {
                label: format!("r.{}", pt.label),
                coords: pt.coords.clone(),
            });
            indices.push(b.fibre(x).iter().map(|j| j + n1).collect());
        }
        parts.fibres = Some(FibreDecomposition::new(points, indices, n1 + n2)?);
    }
    SpectralTriple::new(parts)
}

/// Model selection for the command line and config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuilderConfig {
    TwoPoint {
        m: f64,
    },
    CircleFourier {
        n: usize,
        radius: f64,
    },
    CircleLattice {
        n: usize,
        radius: f64,
    },
    TorusLattice {
        n1: usize,
        n2: usize,
        metric: Option<Vec<f64>>,
    },
    FuzzySphere {
        l: usize,
    },
}

impl BuilderConfig {
    pub fn build(&self) -> Result<SpectralTriple> {
        match self {
            BuilderConfig::TwoPoint { m } => two_point(*m),
            BuilderConfig::CircleFourier { n, radius } => circle_fourier(*n, *radius),
            BuilderConfig::CircleLattice { n, radius } => {
                lattice(&LatticeConfig::circle(*n, *radius))
            }
            BuilderConfig::TorusLattice { n1, n2, metric } => {
                let mut cfg = LatticeConfig::torus(*n1, *n2);
                if let Some(g) = metric {
                    cfg = cfg.with_metric(CellMetric::Constant(g.clone()));
                }
                lattice(&cfg)
            }
            BuilderConfig::FuzzySphere { l } => fuzzy_sphere(*l),
        }
    }
}

/// Value of a fibre-diagonal scalar function at each point, as reals.
pub fn sample_real(triple: &SpectralTriple, a: &ComplexMatrix) -> Result<Vec<f64>> {
    let f = triple.require_fibres()?;
    Ok(f.point_values(a).into_iter().map(|z: C64| z.re).collect())
}
