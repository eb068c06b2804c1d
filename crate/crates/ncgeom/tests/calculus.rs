mod common;

use common::*;
use ncgeom::builders::{lattice, LatticeConfig};
use ncgeom::calculus::*;
use ncgeom::geometry::Chart;
use ncgeom::{c64, ComplexMatrix, C64};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn idempotent_defect(q: &ComplexMatrix) -> (f64, f64) {
    ((&q.matmul(q) - q).operator_norm(), q.hermitian_defect())
}

#[test]
fn holomorphic_square_matches_product() {
    let mut r = rng(5);
    let a = random_hermitian(6, &mut r);
    let sq = holomorphic_calc(|z| z * z, &a, 1e-10).unwrap();
    assert!((&sq - &a.matmul(&a)).max_abs() < 1e-12);
}

#[test]
fn holomorphic_rejects_non_normal() {
    let mut a = ComplexMatrix::zeros(2);
    a[(0, 1)] = c64(1.0, 0.0);
    assert!(holomorphic_calc(|z| z, &a, 1e-10).is_err());
}

#[test]
fn smooth_calc_agrees_with_fourier_route() {
    let u = unitary(5, 11);
    let a = u
        .matmul(&ComplexMatrix::from_real_diagonal(&[
            -0.8, -0.3, 0.0, 0.4, 0.9,
        ]))
        .matmul(&u.adjoint());
    let b = u
        .matmul(&ComplexMatrix::from_real_diagonal(&[
            0.5, -0.6, 0.2, 0.1, -0.9,
        ]))
        .matmul(&u.adjoint());
    let f = SmoothFunction::gaussian(vec![0.1, -0.2], 0.35, vec![(-3.0, 3.0), (-3.0, 3.0)]);
    let direct = smooth_calc(&f, &[&a, &b], 1e-9).unwrap();
    let fourier = smooth_calc_fourier(&f, &[&a, &b], FourierQuadrature::default(), 1e-9).unwrap();
    assert!(
        (&direct - &fourier).max_abs() < 1e-6,
        "{}",
        (&direct - &fourier).max_abs()
    );
    // pointwise oracle in the shared eigenbasis
    let vals: Vec<C64> = [
        (-0.8, 0.5),
        (-0.3, -0.6),
        (0.0, 0.2),
        (0.4, 0.1),
        (0.9, -0.9),
    ]
    .iter()
    .map(|&(x, y)| f.eval(&[x, y]))
    .collect();
    let oracle = u
        .matmul(&ComplexMatrix::from_diagonal(&vals))
        .matmul(&u.adjoint());
    assert!((&direct - &oracle).max_abs() < 1e-12);
}

#[test]
fn smooth_calc_rejects_noncommuting_inputs() {
    let mut r = rng(1);
    let a = random_hermitian(4, &mut r);
    let b = random_hermitian(4, &mut r);
    let f = SmoothFunction::real(vec![(-5.0, 5.0), (-5.0, 5.0)], |x| x[0] * x[1]);
    assert!(smooth_calc(&f, &[&a, &b], 1e-9).is_err());
}

#[test]
fn commutator_expansion_refines_on_the_lattice() {
    // [D, f(cos, sin)] − Σ ∂f [D, ·] is a difference-quotient error, O(h)
    let mut res = Vec::new();
    for n in [32usize, 64, 128] {
        let t = lattice(&LatticeConfig::circle(n, 1.0)).unwrap();
        let (c, s) = (t.generator("cos").unwrap(), t.generator("sin").unwrap());
        let f = SmoothFunction::gaussian(vec![0.5, 0.5], 0.8, vec![(-2.0, 2.0), (-2.0, 2.0)]);
        res.push(
            commutator_expansion(&t, &f, &[c, s], 1e-9)
                .unwrap()
                .residual,
        );
    }
    // pre-asymptotic at small n; the local slope approaches one
    let slope = -loglog_slope(&[64.0, 128.0], &res[1..]);
    assert!(res[0] > res[1] && slope > 0.9, "{res:?} slope {slope}");
}

#[test]
fn nearest_projector_rejects_inputs_without_gap() {
    let b = ComplexMatrix::from_real_diagonal(&[0.5, 1.0]);
    assert!(nearest_projector(&b, 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nearest_projector_outputs_projectors(seed in 0u64..1_000_000, n in 2usize..9, eps in 0.05f64..0.3) {
        let mut r = rng(seed);
        // spectrum within eps/2 of {0,1}, rotated, plus a small hermitian kick
        let diag: Vec<f64> = (0..n)
            .map(|_| if r.random::<bool>() { 1.0 } else { 0.0 } + r.random_range(-eps / 2.0..eps / 2.0))
            .collect();
        let u = unitary(n, seed ^ 0xabc);
        let b = u.matmul(&ComplexMatrix::from_real_diagonal(&diag)).matmul(&u.adjoint()).hermitian_part();
        let q = nearest_projector(&b, eps).unwrap();
        let (idem, herm) = idempotent_defect(&q.q);
        prop_assert!(idem <= 1e-12 && herm <= 1e-12, "{idem:e} {herm:e}");
        prop_assert!(q.distance <= eps);
    }

    #[test]
    fn smooth_calc_commutes_with_its_inputs(seed in 0u64..1_000_000) {
        let u = unitary(6, seed);
        let mut r = rng(seed + 1);
        let d1: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let d2: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = u.matmul(&ComplexMatrix::from_real_diagonal(&d1)).matmul(&u.adjoint()).hermitian_part();
        let b = u.matmul(&ComplexMatrix::from_real_diagonal(&d2)).matmul(&u.adjoint()).hermitian_part();
        let f = SmoothFunction::real(vec![(-2.0, 2.0), (-2.0, 2.0)], |x| (x[0] * 3.0).sin() * x[1].exp());
        let fa = smooth_calc(&f, &[&a, &b], 1e-9).unwrap();
        for m in [&a, &b] {
            prop_assert!((&fa.matmul(m) - &m.matmul(&fa)).operator_norm() <= 1e-9);
        }
    }
}

fn check_partition(t: &ncgeom::SpectralTriple, cover: &CoverSpec) {
    let pou = partition_of_unity(t, cover).unwrap();
    let n = t.dim();
    let mut sum = ComplexMatrix::zeros(n);
    for phi in &pou.functions {
        sum = &sum + phi;
        let eig = phi.eigvalsh().unwrap();
        assert!(eig[0] >= -1e-12 && eig[n - 1] <= 1.0 + 1e-12);
    }
    assert!((&sum - &ComplexMatrix::identity(n)).operator_norm() <= 1e-8);
    // subordinate: φ_α vanishes where the box does not reach
    let fib = t.fibres().unwrap();
    for (phi, b) in pou.functions.iter().zip(&cover.boxes) {
        let vals = fib.point_values(phi);
        for (x, p) in fib.points().iter().enumerate() {
            let inside = p.coords.iter().enumerate().all(|(j, &c)| {
                let mut c = c;
                if let Some(Some(per)) = cover.periods.get(j) {
                    c = b.lo[j] + (c - b.lo[j]).rem_euclid(*per);
                }
                c > b.lo[j] && c < b.hi[j]
            });
            if !inside {
                assert!(vals[x].norm() <= 1e-12, "{} leaks to {}", b.name, p.label);
            }
        }
    }
}

#[test]
fn partitions_of_unity_on_three_covers() {
    let circle = lattice(&LatticeConfig::circle(32, 1.0)).unwrap();
    check_partition(&circle, &arcs(2));
    check_partition(&circle, &arcs(3));
    let torus = lattice(&LatticeConfig::torus(8, 8)).unwrap();
    check_partition(&torus, &torus_quadrants());
}

#[test]
fn local_inverse_examples() {
    let t = lattice(&LatticeConfig::circle(32, 1.0)).unwrap();
    let fib = t.fibres().unwrap();
    let region: Vec<String> = fib
        .points()
        .iter()
        .filter(|p| p.coords[0] < PI)
        .map(|p| p.label.clone())
        .collect();
    let zero = ComplexMatrix::zeros(t.dim());
    let h: Vec<f64> = fib
        .points()
        .iter()
        .map(|p| 2.0 + p.coords[0].cos())
        .collect();
    let hm = fib.real_function(&h);
    assert!(local_inverse(&t, &zero, &hm, &region, 1e-12)
        .unwrap()
        .is_zero());
    let bump: Vec<f64> = fib
        .points()
        .iter()
        .map(|p| {
            let x = p.coords[0];
            if x > 0.3 && x < PI - 0.3 {
                (x - 0.3) * (PI - 0.3 - x)
            } else {
                0.0
            }
        })
        .collect();
    let a = fib.real_function(&bump);
    let id = ComplexMatrix::identity(t.dim());
    assert!((&local_inverse(&t, &a, &id, &region, 1e-12).unwrap() - &a).max_abs() < 1e-14);
    let q = local_inverse(&t, &a, &hm, &region, 1e-12).unwrap();
    let vals = fib.point_values(&q);
    for (x, p) in fib.points().iter().enumerate() {
        assert!((vals[x].re - bump[x] / h[x]).abs() < 1e-13, "{}", p.label);
    }
    // h vanishing in the region is refused
    let hz: Vec<f64> = fib.points().iter().map(|p| p.coords[0].sin()).collect();
    assert!(local_inverse(&t, &a, &fib.real_function(&hz), &region, 1e-12).is_err());
}

#[test]
fn lipschitz_constants_examples() {
    let t = lattice(&LatticeConfig::circle(32, 1.0)).unwrap();
    let fib = t.fibres().unwrap();
    let region: Vec<String> = fib
        .points()
        .iter()
        .filter(|p| p.coords[0].sin().abs() < 0.9)
        .map(|p| p.label.clone())
        .collect();
    let chart = Chart::on_generators("cs", &["cos", "sin"], region.clone());
    let coords = chart.coordinate_matrices(&t).unwrap();
    let k = lipschitz_constants(&t, &coords, &region).unwrap();
    assert!(k.c_lower > 0.0 && k.c_upper.is_finite() && k.c_upper > 0.0);
    // singleton region: B(x) evaluated directly
    let one = vec![region[0].clone()];
    let k1 = lipschitz_constants(&t, &coords, &one).unwrap();
    let syms = coordinate_symbols(&t, &coords);
    let x = fib.position(&region[0]).unwrap();
    let ginv = pseudo_inverse_checked(&gram_at(&syms, x)).unwrap();
    let b = (0..2)
        .map(|i| {
            (0..2)
                .map(|j| ginv[(i, j)].abs() * ncgeom::linalg::dmatrix_norm(&syms[j][x]))
                .sum::<f64>()
                * 2.0
        })
        .fold(0.0, f64::max);
    assert!((k1.c_upper - b).abs() <= 1e-12 * b);
    // D → 2D halves both constants
    let t2 = t.with_dirac(t.dirac().scale_real(2.0)).unwrap();
    let k2 = lipschitz_constants(&t2, &coords, &region).unwrap();
    assert!((k2.c_upper - k.c_upper / 2.0).abs() <= 1e-12 * k.c_upper);
    assert!((k2.c_lower - k.c_lower / 2.0).abs() <= 1e-12 * k.c_lower);
}

#[test]
fn lipschitz_two_sided_bound_on_torus_charts() {
    let t = lattice(&LatticeConfig::torus(12, 12)).unwrap();
    for (lower, upper) in lipschitz_ratios(&t, 12, 21, 50) {
        assert!(lower <= 1.0 && upper <= 1.0, "lower {lower} upper {upper}");
    }
}

#[test]
fn circle_lattice_upper_bound_is_tight_to_first_order_in_h() {
    // in one dimension C_Y = 1 and the continuum bound is an equality;
    // the lattice commutator norm falls short of sup|f'| by a relative O(h)
    let mut excess = Vec::new();
    for n in [64usize, 128, 256] {
        let t = lattice(&LatticeConfig::circle(n, 1.0)).unwrap();
        let worst = lipschitz_ratios(&t, n, 5, 20)
            .iter()
            .map(|r| r.1)
            .fold(0.0, f64::max);
        excess.push(worst - 1.0);
    }
    assert!(excess.iter().all(|&e| e > 0.0 && e < 0.2), "{excess:?}");
    let slope = -loglog_slope(&[64.0, 128.0, 256.0], &excess);
    assert!((slope - 1.0).abs() < 0.15, "{excess:?} slope {slope}");
}
