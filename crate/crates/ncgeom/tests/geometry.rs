mod common;

use common::*;
use nalgebra::DMatrix;
use ncgeom::axioms::Status;
use ncgeom::builders::{circle_fourier, lattice, CellMetric, LatticeConfig};
use ncgeom::geometry::*;
use ncgeom::SpectralTriple;

/// max |g_α(x) − expected| over every chart and point.
fn gram_deviation(t: &SpectralTriple, atlas: &ChartAtlas, expected: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for ch in &atlas.charts {
        let g = gram_matrix_field(t, atlas, &ch.label).unwrap();
        for m in &g.matrices {
            worst = worst.max((m - expected).amax());
        }
    }
    worst
}

#[test]
fn flat_torus_gram_is_identity_and_matches_metric_field() {
    let t = lattice(&LatticeConfig::torus(12, 12)).unwrap();
    let atlas = default_atlas(&t).unwrap();
    assert!(atlas.complete);
    assert_eq!(atlas.charts.len(), 4);
    assert!(gram_deviation(&t, &atlas, &DMatrix::identity(2, 2)) < 1e-12);
    let fib = t.fibres().unwrap();
    for ch in &atlas.charts {
        let g = gram_matrix_field(&t, &atlas, &ch.label).unwrap();
        assert!(g.is_positive_definite(0.5));
        let coords = ch.coordinate_matrices(&t).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let mv = metric_field(&t, &coords[j], &coords[k]).unwrap();
                for (i, l) in g.points.iter().enumerate() {
                    let x = fib.position(l).unwrap();
                    assert!((g.matrices[i][(j, k)] - mv.values[x]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn gram_field_is_the_inverse_tangent_metric() {
    // cotangent metric g^{jk} is the inverse of the tangent metric g_{jk}
    let tangent = [2.0, 0.5, 0.5, 1.0];
    let cfg = LatticeConfig::torus(10, 10).with_metric(CellMetric::Constant(tangent.to_vec()));
    let t = lattice(&cfg).unwrap();
    let atlas = default_atlas(&t).unwrap();
    let inv = DMatrix::from_row_slice(2, 2, &tangent)
        .try_inverse()
        .unwrap();
    assert!(gram_deviation(&t, &atlas, &inv) < 1e-10);

    let c = lattice(&LatticeConfig::circle(16, 2.0)).unwrap();
    let atlas = default_atlas(&c).unwrap();
    assert!(gram_deviation(&c, &atlas, &DMatrix::from_element(1, 1, 0.25)) < 1e-12);
}

#[test]
fn torus_chirality_passes_with_positive_sign() {
    let t = lattice(&LatticeConfig::torus(12, 12)).unwrap();
    let v = chirality_check(&t, None, 1e-8).unwrap();
    assert_eq!(v.status, Status::Pass, "{}", v.details);
    assert_eq!(v.metrics["sign"], 1.0);
    let cyc = chart_domains(&t, None).unwrap();
    let v = chirality_check(&t, Some(&cyc), 1e-8).unwrap();
    assert_eq!(v.status, Status::Pass, "{}", v.details);
}

#[test]
fn cycle_charts_cover_the_torus() {
    let t = lattice(&LatticeConfig::torus(8, 8)).unwrap();
    let cyc = chart_domains(&t, None).unwrap();
    assert!(cyc.complete, "{:?}", cyc.uncovered);
    for ch in &cyc.charts {
        assert_eq!(ch.arity(), 2);
    }
}

#[test]
fn angle_chart_transitions_are_identity_and_cocycle_closes() {
    let t = lattice(&LatticeConfig::torus(12, 12)).unwrap();
    let atlas = default_atlas(&t).unwrap();
    let labels: Vec<&str> = atlas.charts.iter().map(|c| c.label.as_str()).collect();
    let tr = transition_cocycle(&t, &atlas, labels[0], labels[2], Some(labels[3])).unwrap();
    assert!(!tr.points.is_empty());
    assert!(tr.max_imaginary < 1e-10);
    for m in &tr.matrices {
        assert!((m - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }
    assert!(tr.cocycle_residual.unwrap() < 1e-10);
}

#[test]
fn one_form_expansion_refines_on_the_lattice() {
    let res: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let c = lattice(&LatticeConfig::circle(n, 1.0)).unwrap();
            let at = default_atlas(&c).unwrap();
            let fib = c.fibres().unwrap();
            let vals: Vec<f64> = fib
                .points()
                .iter()
                .map(|p| p.coords[0].sin().exp() + 0.3 * (2.0 * p.coords[0]).cos())
                .collect();
            let a = fib.real_function(&vals);
            expand_one_form(&c, &at, &at.charts[0].label, &a)
                .unwrap()
                .max_residual()
        })
        .collect();
    assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
    assert!(-loglog_slope(&[16.0, 32.0, 64.0], &res) > 0.8, "{res:?}");
}

#[test]
fn anticommutator_becomes_block_scalar() {
    let ns = [8usize, 16];
    let res: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let t = lattice(&LatticeConfig::torus(n, n)).unwrap();
            let fib = t.fibres().unwrap();
            let f = |g: &dyn Fn(f64, f64) -> f64| {
                let v: Vec<f64> = fib
                    .points()
                    .iter()
                    .map(|p| g(p.coords[0], p.coords[1]))
                    .collect();
                fib.real_function(&v)
            };
            let a = f(&|x, y| (x + 2.0 * y).sin() + x.cos() * y.sin());
            let b = f(&|x, y| (x - y).cos());
            metric_field(&t, &a, &b).unwrap().max_residual()
        })
        .collect();
    assert!(res[1] < res[0] / 2.0 * 1.2, "{res:?}");
}

#[test]
fn lattice_multiplicity_is_one() {
    let t = lattice(&LatticeConfig::torus(8, 8)).unwrap();
    let atlas = default_atlas(&t).unwrap();
    for ch in &atlas.charts {
        let m = multiplicity_probe(&t, ch, None).unwrap();
        assert_eq!(m.len(), ch.domain.len());
        assert!(m.iter().all(|(_, k)| *k == 1));
    }
    // a huge radius sees every point
    let ch = &atlas.charts[0];
    let m = multiplicity_probe(&t, ch, Some(1e3)).unwrap();
    assert!(m.iter().all(|(_, k)| *k == ch.domain.len()));
}

#[test]
fn fourier_dirac_is_reconstructed_exactly() {
    let t = circle_fourier(64, 1.0).unwrap();
    let r = reconstruct_dirac(&t).unwrap();
    assert!(r.deviation < 1e-12, "{}", r.deviation);
    let t = circle_fourier(32, 2.5).unwrap();
    assert!(reconstruct_dirac(&t).unwrap().deviation < 1e-12);
}

#[test]
fn fourier_model_has_no_charts() {
    let t = circle_fourier(16, 1.0).unwrap();
    assert!(default_atlas(&t).is_err());
    assert!(geometry_report(&t, String::new(), 1, 0.1).is_err());
}

#[test]
fn report_on_the_torus() {
    let t = lattice(&LatticeConfig::torus(8, 8)).unwrap();
    let r = geometry_report(&t, "fp".into(), 1, 0.1).unwrap();
    assert!(r.atlas_complete);
    assert_eq!(r.charts.len(), 4);
    for c in &r.charts {
        assert!(c.domain_size > 0 && c.domain_size <= 64);
        assert!(c.identity_deviation < 1e-12);
        assert!(c.formula_agreement < 1e-10);
        assert_eq!(c.max_multiplicity, 1);
        assert!((c.min_eigenvalue - 1.0).abs() < 1e-12);
    }
    assert_eq!(r.chirality.status, Status::Pass);
    assert_eq!(r.chirality_sign, 1);
    assert_eq!(r.fingerprint, "fp");
}

#[test]
fn skew_product_of_commuting_blocks_vanishes() {
    let a = DMatrix::<ncgeom::C64>::identity(3, 3);
    let b = DMatrix::<ncgeom::C64>::identity(3, 3) * ncgeom::c64(2.0, 0.0);
    assert!(skew_product(&[a.clone(), b]).camax() < 1e-15);
    // a single factor is returned unchanged
    assert!((skew_product(std::slice::from_ref(&a)) - &a).camax() < 1e-15);
}
