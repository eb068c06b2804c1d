mod common;

use common::*;
use ncgeom::axioms::*;
use ncgeom::builders::{
    circle_fourier, direct_sum, fuzzy_sphere, lattice, two_point, LatticeConfig,
};
use ncgeom::dixmier::{dixmier_estimate, weighted};
use ncgeom::{c64, io, ComplexMatrix};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn commutant_dimension_matches_brute_force() {
    let shapes: [&[(usize, usize)]; 8] = [
        &[(4, 1)],
        &[(3, 1), (2, 1)],
        &[(2, 2)],
        &[(1, 3)],
        &[(3, 2), (2, 1)],
        &[(2, 3), (3, 1)],
        &[(1, 2), (2, 2), (3, 1)],
        &[(4, 3)],
    ];
    for (s, shape) in shapes.iter().enumerate() {
        let (set, expected) = block_set(shape, 3, 40 + s as u64);
        assert!(set[0].dim() <= 12);
        let refs: Vec<&ComplexMatrix> = set.iter().collect();
        let fast = commutant_dimension(&refs, 1e-12, 3).unwrap();
        let brute = brute_force_commutant(&set);
        assert_eq!(brute, expected, "shape {shape:?}");
        assert_eq!(fast, brute, "shape {shape:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn commutant_dimension_matches_brute_force_on_random_shapes(seed in 0u64..100_000, k in 1usize..4) {
        let mut r = rng(seed);
        let mut shape = Vec::new();
        let mut n = 0;
        for _ in 0..k {
            let d = r.random_range(1..4usize);
            let m = r.random_range(1..3usize);
            if n + d * m > 12 {
                break;
            }
            n += d * m;
            shape.push((d, m));
        }
        prop_assume!(!shape.is_empty());
        // dimension-one blocks repeated across summands would be equivalent
        prop_assume!(shape.iter().filter(|(d, _)| *d == 1).count() <= 1);
        let (set, expected) = block_set(&shape, 2, seed);
        let refs: Vec<&ComplexMatrix> = set.iter().collect();
        let brute = brute_force_commutant(&set);
        prop_assert_eq!(brute, expected);
        prop_assert_eq!(commutant_dimension(&refs, 1e-12, seed).unwrap(), brute);
    }

    #[test]
    fn first_order_residual_is_unitarily_invariant(seed in 0u64..100_000) {
        for t in [two_point(1.7).unwrap(), lattice(&LatticeConfig::circle(16, 1.0)).unwrap()] {
            let u = unitary(t.dim(), seed);
            let a = check_first_order(&t, 1e-8).residual;
            let b = check_first_order(&t.conjugated(&u).unwrap(), 1e-8).residual;
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn two_point_first_order_fails_with_unit_residual() {
    let v = check_first_order(&two_point(1.0).unwrap(), 1e-8);
    assert_eq!(v.status, Status::Fail);
    assert!((v.residual - 1.0).abs() <= 1e-12);
}

#[test]
fn lattice_first_order_refines_linearly() {
    let dims = [16.0, 32.0, 64.0];
    let res: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            check_first_order(&lattice(&LatticeConfig::circle(n, 1.0)).unwrap(), 1.0).residual
        })
        .collect();
    let slope = -loglog_slope(&dims, &res);
    assert!(slope >= 0.9, "{res:?}");
    // residual ≤ C/n with one constant
    let c = res.iter().zip(dims).map(|(r, n)| r * n).fold(0.0, f64::max);
    assert!(c < 8.0);
}

#[test]
fn circle_orientability_and_closedness() {
    let t = circle_fourier(256, 1.0).unwrap();
    let v = check_orientability(&t, 1e-10);
    assert_eq!(v.status, Status::Pass);
    assert!(v.metrics["representation_defect"] <= 1e-10);
    assert!(v.metrics["boundary"] <= 1e-12);
    // ∮ [D,u]⟨D⟩^{−1}
    let du = t.d(t.generator("u").unwrap());
    let est = dixmier_estimate(&weighted(&t, &du, 1).unwrap()).unwrap();
    assert!(est.value.norm() <= 0.05);
    assert_eq!(check_closedness(&t, 0.05, 8, 0).status, Status::Pass);
}

#[test]
fn orientability_on_the_torus_lattice_refines() {
    // Fourier-free model: the cycle identity holds up to the lattice error
    let r8 = check_orientability(&lattice(&LatticeConfig::torus(8, 8)).unwrap(), 1.0).residual;
    let r16 = check_orientability(&lattice(&LatticeConfig::torus(16, 16)).unwrap(), 1.0).residual;
    assert!(r16 < r8 / 2.0, "{r8} {r16}");
}

#[test]
fn ko_sign_table_rows() {
    // (J², JD, JΓ) by p mod 8
    let table: [(i8, i8, Option<i8>); 8] = [
        (1, 1, Some(1)),
        (1, -1, None),
        (-1, 1, Some(-1)),
        (-1, 1, None),
        (-1, 1, Some(1)),
        (-1, -1, None),
        (1, 1, Some(-1)),
        (1, 1, None),
    ];
    for (p, &(a, b, c)) in table.iter().enumerate() {
        assert!(compatible_rows(a, b, c).contains(&p), "p = {p}");
        for r in compatible_rows(a, b, c) {
            assert_eq!(r % 2, p % 2);
        }
    }
    assert_eq!(compatible_rows(1, -1, None), vec![1]);
    assert_eq!(compatible_rows(-1, 1, Some(-1)), vec![2]);
}

#[test]
fn reality_on_reference_models() {
    let v = check_reality(&circle_fourier(32, 1.0).unwrap(), 1e-10);
    assert_eq!(v.status, Status::Pass);
    let v = check_reality(&lattice(&LatticeConfig::torus(8, 8)).unwrap(), 1e-10);
    assert_eq!(v.status, Status::Pass, "{}", v.details);
    assert!(v.metrics.contains_key("row_2"));
}

#[test]
fn pairing_standardness() {
    let t = circle_fourier(16, 1.0).unwrap();
    let n = t.dim();
    let v = check_pairing_standard(&t, &ComplexMatrix::scalar(n, c64(2.5, 0.0)), 1e-10).unwrap();
    assert_eq!(v.status, Status::Pass);
    // commutes with everything on a direct sum but is not scalar
    let s = direct_sum(&t, &t).unwrap();
    let m = s.generator("block_l").unwrap().scale_real(1.0).clone();
    let m = &m + &s.generator("block_r").unwrap().scale_real(2.0);
    let v = check_pairing_standard(&s, &m, 1e-10).unwrap();
    assert_eq!(v.status, Status::Fail);
    assert!(v.details.contains("not scalar"));
    // a diagonal non-scalar matrix on the circle fails to commute with u
    let diag: Vec<f64> = (0..n).map(|j| 1.0 + j as f64).collect();
    let v = check_pairing_standard(&t, &ComplexMatrix::from_real_diagonal(&diag), 1e-10).unwrap();
    assert_eq!(v.status, Status::Fail);
}

#[test]
fn connectivity_counts_components() {
    let one = [
        circle_fourier(32, 1.0).unwrap(),
        lattice(&LatticeConfig::circle(16, 1.0)).unwrap(),
        lattice(&LatticeConfig::torus(8, 8)).unwrap(),
        fuzzy_sphere(3).unwrap(),
    ];
    for t in &one {
        let v = check_connectivity(t, 1e-8);
        assert_eq!(v.metrics["components"], 1.0, "{}", t.name());
    }
    for (a, b) in [(&one[0], &one[0]), (&one[1], &one[1]), (&one[0], &one[1])] {
        let v = check_connectivity(&direct_sum(a, b).unwrap(), 1e-8);
        assert_eq!(v.metrics["components"], 2.0, "{}", v.details);
    }
}

#[test]
fn irreducibility_on_builders() {
    assert_eq!(
        check_irreducibility(&circle_fourier(16, 1.0).unwrap(), 1e-8).status,
        Status::Pass
    );
    assert_eq!(
        check_irreducibility(&fuzzy_sphere(3).unwrap(), 1e-8).status,
        Status::Pass
    );
    let c = circle_fourier(8, 1.0).unwrap();
    let v = check_irreducibility(&direct_sum(&c, &c).unwrap(), 1e-8);
    assert_eq!(v.metrics["commutant_dimension"], 2.0);
}

#[test]
fn torus_lattice_doublers_enlarge_the_commutant() {
    // with symmetric differences, (−1)^{i+j}Γ, (−1)^i γ² and (−1)^j γ¹
    // commute with D and with every site function
    let n = 8;
    let t = lattice(&LatticeConfig::torus(n, n)).unwrap();
    let sx = [[0.0, 1.0], [1.0, 0.0]];
    let sz = [[1.0, 0.0], [0.0, -1.0]];
    let site = |s: usize| (s / n, s % n);
    let build = |sign: &dyn Fn(usize, usize) -> f64, spin: [[C; 2]; 2]| {
        ComplexMatrix::from_fn(2 * n * n, |a, b| {
            let (s, r) = (a / 2, a % 2);
            let (s2, q) = (b / 2, b % 2);
            if s != s2 {
                return c64(0.0, 0.0);
            }
            let (i, j) = site(s);
            spin[r][q] * sign(i, j)
        })
    };
    type C = ncgeom::C64;
    let re = |m: [[f64; 2]; 2]| m.map(|row| row.map(|x| c64(x, 0.0)));
    let sy = [
        [c64(0.0, 0.0), c64(0.0, -1.0)],
        [c64(0.0, 1.0), c64(0.0, 0.0)],
    ];
    let ops = [
        build(&|i, j| if (i + j) % 2 == 0 { 1.0 } else { -1.0 }, re(sz)),
        build(&|i, _| if i % 2 == 0 { 1.0 } else { -1.0 }, sy),
        build(&|_, j| if j % 2 == 0 { 1.0 } else { -1.0 }, re(sx)),
    ];
    for op in &ops {
        assert!(ncgeom::linalg::commutator(t.dirac(), op).unwrap().max_abs() < 1e-12);
        for (_, g) in t.generators() {
            assert!(ncgeom::linalg::commutator(g, op).unwrap().max_abs() < 1e-12);
        }
    }
    let v = check_irreducibility(&t, 1e-8);
    assert_eq!(v.metrics["commutant_dimension"], 4.0);
}

#[test]
fn circle_dimension_and_absolute_continuity() {
    let t = circle_fourier(256, 1.0).unwrap();
    assert_eq!(check_dimension(&t, 0.05).status, Status::Pass);
    let v = check_absolute_continuity(&t, 1e-8, 8, 0);
    assert_eq!(v.status, Status::Pass, "{}", v.details);
}

#[test]
fn full_report_on_the_circle() {
    let t = circle_fourier(256, 1.0).unwrap();
    let cfg = CheckConfig::default();
    let r = run_full_report(&t, &cfg, io::fingerprint(&t));
    for v in &r.verdicts {
        if v.condition == "poincare_duality" {
            assert_eq!(v.status, Status::NotEvaluated);
        } else {
            assert_eq!(v.status, Status::Pass, "{}: {}", v.condition, v.details);
        }
    }
    assert_eq!(r.verdicts.len(), 11);
    let again = run_full_report(&t, &cfg, io::fingerprint(&t));
    assert_eq!(
        serde_json::to_string(&r).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}

#[test]
fn report_flags_missing_data_as_inconclusive() {
    let r = run_full_report(
        &two_point(1.0).unwrap(),
        &CheckConfig::default(),
        String::new(),
    );
    assert!(r.any_failed());
    assert_eq!(
        r.verdict("orientability").unwrap().status,
        Status::Inconclusive
    );
    assert_eq!(r.verdict("reality").unwrap().status, Status::Inconclusive);
}
