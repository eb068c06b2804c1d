mod common;

use common::*;
use ncgeom::builders::{
    circle_fourier, direct_sum, fuzzy_sphere, lattice, two_point, LatticeConfig,
};
use ncgeom::io::*;
use ncgeom::{Error, SpectralTriple};
use proptest::prelude::*;

fn models() -> Vec<SpectralTriple> {
    vec![
        two_point(0.7).unwrap(),
        circle_fourier(8, 1.5).unwrap(),
        lattice(&LatticeConfig::circle(12, 1.0)).unwrap(),
        lattice(&LatticeConfig::torus(8, 9)).unwrap(),
        fuzzy_sphere(2).unwrap(),
        direct_sum(&two_point(1.0).unwrap(), &circle_fourier(8, 1.0).unwrap()).unwrap(),
    ]
}

fn bits(t: &SpectralTriple) -> Vec<u64> {
    t.dirac()
        .as_slice()
        .iter()
        .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
        .collect()
}

#[test]
fn documents_round_trip_exactly() {
    for t in models() {
        let text = to_json(&t);
        let back = from_json(&text).unwrap();
        assert_eq!(to_json(&back), text, "{}", t.name());
        assert_eq!(bits(&back), bits(&t));
        assert_eq!(fingerprint(&back), fingerprint(&t));
        assert_eq!(back.generators().len(), t.generators().len());
    }
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    for (i, t) in models().iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        save(t, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(fingerprint(&back), fingerprint(t));
    }
    assert!(matches!(
        load(&dir.path().join("absent.json")),
        Err(Error::Io(_))
    ));
}

#[test]
fn fingerprint_is_stable_and_sensitive() {
    let a = fingerprint(&two_point(1.0).unwrap());
    assert_eq!(a, fingerprint(&two_point(1.0).unwrap()));
    assert_eq!(a.len(), 64);
    assert_ne!(a, fingerprint(&two_point(1.0 + 1e-15).unwrap()));
}

#[test]
fn schema_errors_name_the_field() {
    let mut doc: serde_json::Value =
        serde_json::from_str(&to_json(&two_point(1.0).unwrap())).unwrap();
    doc["dirac"]["re"].as_array_mut().unwrap().pop();
    match from_json(&doc.to_string()) {
        Err(Error::Schema(msg)) => assert!(msg.contains("dirac"), "{msg}"),
        other => panic!("expected a schema error, got {other:?}"),
    }

    let mut doc: serde_json::Value =
        serde_json::from_str(&to_json(&two_point(1.0).unwrap())).unwrap();
    doc["dirac"]["rows"] = serde_json::json!("two");
    match from_json(&doc.to_string()) {
        Err(Error::Schema(msg)) => assert!(msg.contains("dirac.rows"), "{msg}"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut doc: serde_json::Value =
        serde_json::from_str(&to_json(&two_point(1.0).unwrap())).unwrap();
    doc["colour"] = serde_json::json!("blue");
    assert!(matches!(from_json(&doc.to_string()), Err(Error::Schema(_))));
    assert!(matches!(from_json("{ not json"), Err(Error::Schema(_))));
}

#[test]
fn corrupt_grading_is_rejected() {
    let t = lattice(&LatticeConfig::torus(8, 8)).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&to_json(&t)).unwrap();
    // Γ² = 1 breaks once a diagonal entry is doubled
    doc["grading"]["re"][0] = serde_json::json!(2.0);
    let err = from_json(&doc.to_string()).unwrap_err();
    assert!(!matches!(err, Error::Schema(_)), "{err}");
    assert!(
        err.to_string().contains("grading") || err.to_string().contains("Γ"),
        "{err}"
    );
}

#[test]
fn non_hermitian_dirac_is_rejected() {
    let mut doc: serde_json::Value =
        serde_json::from_str(&to_json(&two_point(1.0).unwrap())).unwrap();
    doc["dirac"]["im"][1] = serde_json::json!(0.5);
    assert!(from_json(&doc.to_string()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_triples_round_trip_bit_for_bit(n in 2usize..8, seed in 0u64..1_000_000) {
        let t = random_point_triple(n, seed);
        let back = from_json(&to_json(&t)).unwrap();
        prop_assert_eq!(bits(&back), bits(&t));
        prop_assert_eq!(fingerprint(&back), fingerprint(&t));
    }
}
