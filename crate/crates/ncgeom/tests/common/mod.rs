//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ncgeom::calculus::{holomorphic_calc, lipschitz_constants, CoverBox, CoverSpec};
use ncgeom::geometry::default_atlas;
use ncgeom::{
    c64, ComplexMatrix, FibreDecomposition, SamplePoint, SpectralTriple, TripleParts, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian(n: usize, r: &mut ChaCha8Rng) -> ComplexMatrix {
    let data: Vec<C64> = (0..n * n)
        .map(|_| c64(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::new(n, data).unwrap().hermitian_part()
}

/// n points with the full diagonal algebra and a random dense D.
pub fn random_point_triple(n: usize, seed: u64) -> SpectralTriple {
    let mut r = rng(seed);
    let d = random_hermitian(n, &mut r);
    point_triple(d)
}

/// Diagonal algebra on n points (projectors `e{i}`, points `p{i}`) with the given D.
pub fn point_triple(d: ComplexMatrix) -> SpectralTriple {
    let n = d.dim();
    let mut parts = TripleParts::new("points", d);
    parts.generators = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            (format!("e{i}"), ComplexMatrix::from_real_diagonal(&v))
        })
        .collect();
    parts.fibres = Some(
        FibreDecomposition::new(
            (0..n)
                .map(|i| SamplePoint {
                    label: format!("p{i}"),
                    coords: vec![i as f64],
                })
                .collect(),
            (0..n).map(|i| vec![i]).collect(),
            n,
        )
        .unwrap(),
    );
    parts.commutative = true;
    SpectralTriple::new(parts).unwrap()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// ‖[D, diag(v)]‖ computed densely.
pub fn diagonal_lipschitz(d: &ComplexMatrix, v: &[f64]) -> f64 {
    let a = ComplexMatrix::from_real_diagonal(v);
    (&d.matmul(&a) - &a.matmul(d)).operator_norm()
}

/// Largest t with ‖[D, diag(t·e)]‖ ≤ 1, by bisection on the homogeneous norm.
pub fn bisect_scale(d: &ComplexMatrix, e: &[f64]) -> f64 {
    let unit = diagonal_lipschitz(d, e);
    let (mut lo, mut hi) = (0.0, 2.0 / unit.max(1e-300));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v: Vec<f64> = e.iter().map(|x| x * mid).collect();
        if diagonal_lipschitz(d, &v) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Brute-force distance between points 0 and 1 of a three-point diagonal
/// triple. Up to constants a = r(cos φ, sin φ) on points 1 and 2 with a
/// vanishing on point 0; the norm is homogeneous so the boundary radius is
/// 1/‖[D, diag(0, cos φ, sin φ)]‖ and d = max_φ cos φ / that norm, found by
/// a dense scan followed by golden-section refinement.
pub fn three_point_oracle(d: &ComplexMatrix) -> f64 {
    let g = |phi: f64| -> f64 { phi.cos() / diagonal_lipschitz(d, &[0.0, phi.cos(), phi.sin()]) };
    let h = std::f64::consts::PI;
    let steps = 4000;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
    for k in 0..=steps {
        let phi = -h / 2.0 + h * k as f64 / steps as f64;
        let v = g(phi);
        if v > best {
            best = v;
            arg = phi;
        }
    }
    let (mut a, mut b) = (arg - h / steps as f64, arg + h / steps as f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = b - ratio * (b - a);
        let m2 = a + ratio * (b - a);
        if g(m1) < g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    g(0.5 * (a + b)).max(best)
}

/// Dimension of the joint commutant by SVD of the stacked maps
/// T ↦ XT − TX written as I⊗X − Xᵀ⊗I on column-stacked T.
pub fn brute_force_commutant(set: &[ComplexMatrix]) -> usize {
    let n = set[0].dim();
    let n2 = n * n;
    let mut big = DMatrix::<C64>::zeros(n2 * set.len(), n2);
    for (s, x) in set.iter().enumerate() {
        let xm = x.to_dmatrix();
        for i in 0..n {
            for j in 0..n {
                // column index of T_ij in column stacking
                let col = j * n + i;
                // (XT)_kj gets X_ki T_ij ; (TX)_il gets T_ij X_jl
                for k in 0..n {
                    big[(s * n2 + j * n + k, col)] += xm[(k, i)];
                }
                for l in 0..n {
                    big[(s * n2 + l * n + i, col)] -= xm[(j, l)];
                }
            }
        }
    }
    let sv = big.singular_values();
    // scale by the inputs, not by the map: scalar sets give a zero map
    let scale = set.iter().map(|x| x.max_abs()).fold(0.0, f64::max);
    n2 - sv.iter().filter(|&&s| s > 1e-8 * scale).count()
}

pub fn arcs(k: usize) -> CoverSpec {
    // k overlapping arcs of width 2·(2π/k)
    let w = 2.0 * PI / k as f64;
    CoverSpec {
        boxes: (0..k)
            .map(|i| CoverBox {
                name: format!("arc{i}"),
                lo: vec![i as f64 * w - 0.6 * w],
                hi: vec![i as f64 * w + 0.6 * w],
            })
            .collect(),
        periods: vec![Some(2.0 * PI)],
    }
}

/// Four overlapping boxes around the quadrant centres of the flat torus.
pub fn torus_quadrants() -> CoverSpec {
    let w = PI;
    let boxes = (0..4)
        .map(|i| {
            let (a, b) = ((i / 2) as f64 * w, (i % 2) as f64 * w);
            CoverBox {
                name: format!("q{i}"),
                lo: vec![a - 0.7 * w, b - 0.7 * w],
                hi: vec![a + 0.7 * w, b + 0.7 * w],
            }
        })
        .collect();
    CoverSpec {
        boxes,
        periods: vec![Some(2.0 * PI), Some(2.0 * PI)],
    }
}

/// sup over the region of the central-difference gradient, against the
/// commutator norm, for a = f(θ) with f a random trigonometric polynomial.
pub fn lipschitz_ratios(
    t: &ncgeom::SpectralTriple,
    n: usize,
    seed: u64,
    count: usize,
) -> Vec<(f64, f64)> {
    let atlas = default_atlas(t).unwrap();
    let fib = t.fibres().unwrap();
    let p = fib.points()[0].coords.len();
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::new();
    let mut r = rng(seed);
    for chart in &atlas.charts {
        let coords = chart.coordinate_matrices(t).unwrap();
        let k = lipschitz_constants(t, &coords, &chart.domain).unwrap();
        let mut worst_upper: f64 = 0.0;
        let mut worst_lower: f64 = 0.0;
        for _ in 0..count {
            let terms: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        r.random_range(-1.0..1.0),
                        r.random_range(0.0..2.0 * PI),
                        r.random_range(-3..4) as f64,
                        r.random_range(-3..4) as f64,
                    )
                })
                .collect();
            let f = |x: &[f64]| -> f64 {
                terms
                    .iter()
                    .map(|(a, ph, m1, m2)| {
                        a * (m1 * x[0] + if p == 2 { m2 * x[1] } else { 0.0 } + ph).cos()
                    })
                    .sum()
            };
            let grad = |x: &[f64]| -> f64 {
                (0..p)
                    .map(|j| {
                        let (mut u, mut v) = (x.to_vec(), x.to_vec());
                        u[j] += h;
                        v[j] -= h;
                        ((f(&u) - f(&v)) / (2.0 * h)).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            };
            let vals: Vec<f64> = fib.points().iter().map(|q| f(&q.coords)).collect();
            let a = fib.real_function(&vals);
            let comm = t.d(&a).operator_norm();
            if comm == 0.0 {
                continue;
            }
            let on_region = chart
                .domain
                .iter()
                .map(|l| grad(&fib.points()[fib.position(l).unwrap()].coords))
                .fold(0.0, f64::max);
            let everywhere = fib
                .points()
                .iter()
                .map(|q| grad(&q.coords))
                .fold(0.0, f64::max);
            worst_upper = worst_upper.max(on_region / (k.c_upper * comm));
            worst_lower = worst_lower.max(k.c_lower * comm / everywhere);
        }
        out.push((worst_lower, worst_upper));
    }
    out
}

pub fn unitary(n: usize, seed: u64) -> ComplexMatrix {
    let mut r = rng(seed);
    let h = random_hermitian(n, &mut r);
    holomorphic_calc(|z| (c64(0.0, 1.0) * z).exp(), &h, 1e-10).unwrap()
}

/// Random set acting as ⊕_r A_r ⊗ 1_{m_r} in a random basis. With
/// inequivalent random blocks the commutant is ⊕_r M_{m_r}.
pub fn block_set(
    blocks: &[(usize, usize)],
    count: usize,
    seed: u64,
) -> (Vec<ComplexMatrix>, usize) {
    let n: usize = blocks.iter().map(|(d, m)| d * m).sum();
    let u = unitary(n, seed);
    let mut r = rng(seed + 7);
    let set = (0..count)
        .map(|_| {
            let mut x = ComplexMatrix::zeros(n);
            let mut off = 0;
            for &(d, m) in blocks {
                let a = random_hermitian(d, &mut r);
                for copy in 0..m {
                    for i in 0..d {
                        for j in 0..d {
                            x[(off + copy * d + i, off + copy * d + j)] = a[(i, j)];
                        }
                    }
                }
                off += d * m;
            }
            u.matmul(&x).matmul(&u.adjoint())
        })
        .collect();
    (set, blocks.iter().map(|(_, m)| m * m).sum())
}
