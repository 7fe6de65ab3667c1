use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ncsigma_cli::output::verify_manifest;
use serde_json::Value;

fn ncsigma(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncsigma"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn build_is_deterministic_and_verifiable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = ncsigma(&["build"], &a);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(code(&ncsigma(&["build"], &b)), 0);

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["conventions"]["charge_sign"], -1);
    assert_eq!(manifest["conventions"]["duality_branch"], "self-dual");
    assert!(verify_manifest(&a).unwrap().is_empty());
    for f in manifest["files"].as_array().unwrap() {
        let rel = f["path"].as_str().unwrap();
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    let report = json(&a.join("report.json"));
    assert!((report["action"].as_f64().unwrap() - 2.0).abs() < 1e-3);

    // verify reproduces the build-time report
    let v = dir.path().join("v");
    let projection = a.join("projection.json");
    let o = ncsigma(&["verify", "--input", projection.to_str().unwrap()], &v);
    assert_eq!(code(&o), 0);
    let again = json(&v.join("report.json"));
    for key in ["trace", "action", "charge_raw", "bp_gap", "sd_residual", "idempotency_residual"] {
        let (x, y) = (report[key].as_f64().unwrap(), again[key].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10, "{key}: {x} vs {y}");
    }

    // a tampered file is detected
    fs::write(a.join("report.csv"), "tampered\n").unwrap();
    assert_eq!(verify_manifest(&a).unwrap(), vec!["report.csv".to_string()]);
}

#[test]
fn verify_identity_and_corrupted_input() {
    let dir = tempfile::tempdir().unwrap();
    let one = write_config(
        dir.path(),
        "one.json",
        r#"{"format":"twisted-series/1","theta":0.37,"half_width":4,"coeffs":[[0,0,1.0,0.0]]}"#,
    );
    let out = dir.path().join("one");
    assert_eq!(code(&ncsigma(&["verify", "--input", &one], &out)), 0);
    let r = json(&out.join("report.json"));
    for key in ["action", "charge_raw", "bp_gap", "eom_residual", "idempotency_residual"] {
        assert_eq!(r[key].as_f64().unwrap(), 0.0, "{key}");
    }
    assert_eq!(r["trace"].as_f64().unwrap(), 1.0);

    let bad = write_config(dir.path(), "bad.json", r#"{"format":"twisted-series/1","theta":"#);
    assert_eq!(code(&ncsigma(&["verify", "--input", &bad], &dir.path().join("bad"))), 2);
    let missing = dir.path().join("missing.json");
    let o = ncsigma(&["verify", "--input", missing.to_str().unwrap()], &dir.path().join("m"));
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_configurations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&ncsigma(&["build", "--q", "0", "--alpha", "-2"], &out)), 2);
    assert_eq!(code(&ncsigma(&["build", "--window", "3"], &out)), 2);
    assert_eq!(code(&ncsigma(&["build", "--tau-im", "0"], &out)), 2);
    assert_eq!(code(&ncsigma(&["build", "--r", "2", "--q", "4", "--alpha", "-1"], &out)), 2);
    assert_eq!(code(&ncsigma(&["build", "--bogus"], &out)), 2);
    let both = write_config(dir.path(), "both.json", r#"{"alpha": -2.0, "theta": 0.4}"#);
    assert_eq!(code(&ncsigma(&["build", "--config", &both], &out)), 2);
    let unknown = write_config(dir.path(), "unknown.json", r#"{"windw": 8}"#);
    assert_eq!(code(&ncsigma(&["build", "--config", &unknown], &out)), 2);
    // nothing was written for rejected configurations
    assert!(!out.exists());
}

#[test]
fn tiny_window_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m4");
    let o = ncsigma(&["build", "--window", "4"], &out);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("window M = 4"));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 3);
}

#[test]
fn flow_budget_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(dir.path(), "zero.json", r#"{"window": 12, "flow": {"max_steps": 0}}"#);
    assert_eq!(code(&ncsigma(&["flow", "--config", &zero], &dir.path().join("z"))), 3);

    let short = write_config(dir.path(), "short.json", r#"{"window": 12, "flow": {"max_steps": 5}}"#);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&ncsigma(&["flow", "--config", &short, "--seed", "11"], &a)), 0);
    assert_eq!(code(&ncsigma(&["flow", "--config", &short, "--seed", "11"], &b)), 0);
    assert_eq!(code(&ncsigma(&["flow", "--config", &short, "--seed", "12"], &c)), 0);
    let trace = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(trace(&a), trace(&b));
    assert_ne!(trace(&a), trace(&c));
    let summary = json(&a.join("trace.json"));
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["accepted_steps"], 5);
}

#[test]
fn scan_equivalences_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "ok.json",
        r#"{"window": 12, "scan": {"grid": 1, "phase_duplicates": true}}"#,
    );
    let out = dir.path().join("ok");
    let o = ncsigma(&["scan", "--config", &ok], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = json(&out.join("scan.json"));
    assert_eq!(table["rows"].as_array().unwrap().len(), 6);
    assert!(out.join("projections/row-0005.json").exists());
    assert!(fs::read_to_string(out.join("scan.csv")).unwrap().starts_with("lambda_re,lambda_im"));

    // ψ = 0 has no invertible Gram element: the row is flagged
    let degenerate = write_config(
        dir.path(),
        "zero.json",
        r#"{"window": 12, "scan": {"grid": 1, "lattice_duplicates": false,
            "amplitude_sets": [[[1.0, 0.0]], [[0.0, 0.0]]]}}"#,
    );
    assert_eq!(code(&ncsigma(&["scan", "--config", &degenerate], &dir.path().join("d"))), 3);

    let empty = write_config(dir.path(), "empty.json", r#"{"scan": {"grid": 0}}"#);
    assert_eq!(code(&ncsigma(&["scan", "--config", &empty], &dir.path().join("e"))), 2);
}

#[test]
fn selftest_passes_and_pins_conventions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st");
    assert_eq!(code(&ncsigma(&["selftest"], &out)), 0);
    assert!(out.join("selftest.json").exists());
    let wrong = ncsigma(&["selftest", "--variant", "z1z2-direct"], &dir.path().join("w"));
    assert_eq!(code(&wrong), 3);
}
