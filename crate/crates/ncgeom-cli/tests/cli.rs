use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ncgeom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncgeom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn build(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut all = vec!["build"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let o = ncgeom(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn two_point_axioms_fail_first_order() {
    let dir = tempfile::tempdir().unwrap();
    let f = build(dir.path(), "tp.json", &["--model", "two-point", "--m", "2"]);
    let o = ncgeom(&["axioms", "--input", f.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(
        text.contains("first_order") && text.contains("FAIL"),
        "{text}"
    );
}

#[test]
fn two_point_distance_is_inverse_mass() {
    let dir = tempfile::tempdir().unwrap();
    let f = build(dir.path(), "tp.json", &["--model", "two-point", "--m", "2"]);
    let o = ncgeom(&[
        "distance",
        "--input",
        f.to_str().unwrap(),
        "--from",
        "x0",
        "--to",
        "x1",
        "--degree",
        "2",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(v["history"].as_array().unwrap().len(), 2);
}

#[test]
fn circle_passes_and_structured_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let f = build(dir.path(), "circle.json", &["--model", "circle-fourier"]);
    let input = f.to_str().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = ncgeom(&[
            "axioms",
            "--input",
            input,
            "--format",
            "structured",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = ncgeom(&["dimension", "--input", input, "--format", "structured"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = v["estimate"]["p_estimate"].as_f64().unwrap();
    assert!((0.95..=1.05).contains(&p));
}

#[test]
fn small_fourier_circle_is_inconclusive() {
    // absolute continuity needs more modes than n = 64 provides
    let dir = tempfile::tempdir().unwrap();
    let f = build(
        dir.path(),
        "c64.json",
        &["--model", "circle-fourier", "--n", "64"],
    );
    let o = ncgeom(&["axioms", "--input", f.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
}

#[test]
fn geometry_needs_fibres() {
    let dir = tempfile::tempdir().unwrap();
    let f = build(
        dir.path(),
        "c.json",
        &["--model", "circle-fourier", "--n", "16"],
    );
    let o = ncgeom(&["geometry", "--input", f.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn torus_geometry_passes() {
    let dir = tempfile::tempdir().unwrap();
    let f = build(
        dir.path(),
        "t.json",
        &["--model", "torus-lattice", "--n1", "8", "--n2", "8"],
    );
    let o = ncgeom(&["geometry", "--input", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("chirality"));
    let o = ncgeom(&[
        "geometry",
        "--input",
        f.to_str().unwrap(),
        "--format",
        "structured",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["charts"].as_array().unwrap().len(), 4);
    assert_eq!(v["chirality_sign"], 1);
}

#[test]
fn input_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        code(&ncgeom(&["axioms", "--input", missing.to_str().unwrap()])),
        3
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 3}").unwrap();
    let o = ncgeom(&["dimension", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("name"));

    let f = build(dir.path(), "tp.json", &["--model", "two-point"]);
    let o = ncgeom(&[
        "distance",
        "--input",
        f.to_str().unwrap(),
        "--from",
        "x0",
        "--to",
        "elsewhere",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn invalid_build_parameters_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = ncgeom(&[
        "build",
        "--model",
        "circle-lattice",
        "--n",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
    let o = ncgeom(&["axioms", "--input", "x", "--tol", "0"]);
    assert_ne!(code(&o), 0);
}
