//! End-to-end tests of the `polaron` binary: schemas, determinism,
//! provenance and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polaron"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polaron-cli-{}-{name}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

/// One solved artifact shared by the tests.
fn solved() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = scratch("shared");
        let o = run(&["solve", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dir
    })
}

fn artifact() -> String {
    solved().join("pekar.json").to_string_lossy().into_owned()
}

fn manifest(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("manifest_{command}.json"))).unwrap()).unwrap()
}

#[test]
fn solve_is_deterministic_and_reports_constants() {
    let dir = scratch("solve");
    let o = run(&["solve", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    for key in ["e_pek", "lambda_pek", "m_lp", "lambda_gauss", "iterations"] {
        assert!(v.get(key).is_some(), "summary lacks {key}");
    }
    assert!((v["e_pek"].as_f64().unwrap() + 0.10851).abs() < 1e-4);
    let first = std::fs::read(dir.join("pekar.json")).unwrap();
    assert_eq!(first, std::fs::read(solved().join("pekar.json")).unwrap());
    let m = manifest(&dir, "solve");
    assert_eq!(m["source_checksum"], v["artifact_checksum"]);
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_configuration_is_a_usage_error() {
    let dir = scratch("badcfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# tolerance must be positive\ntol = 0\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tol"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let o = run(&["verify", "--artifact", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pekar_suite_passes_on_fresh_artifact() {
    let dir = scratch("verify");
    let o = run(&["verify", "--suite", "pekar", "--artifact", &artifact(), "--out", dir.to_str().unwrap()]);
    let v = stdout_json(&o);
    assert!(o.status.success(), "{v}");
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 9);
    assert!(checks.iter().all(|c| c["measured"].is_number() && c["tolerance"].is_number()));
}

#[test]
fn tampered_artifact_fails_before_checks() {
    let dir = scratch("tamper");
    let text = std::fs::read_to_string(artifact()).unwrap();
    let start = text.find("\"phi\":[").unwrap() + 7;
    let idx = start + text[start..].find(|c: char| c.is_ascii_digit() && c != '0').unwrap();
    let mut bad = text.clone();
    bad.replace_range(idx..idx + 1, if &text[idx..idx + 1] == "7" { "8" } else { "7" });
    let path = dir.join("pekar.json");
    std::fs::write(&path, bad).unwrap();
    let o = run(&["verify", "--suite", "pekar", "--artifact", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum mismatch"));
}

#[test]
fn bogoliubov_suite_emits_oracle_rows() {
    let dir = scratch("bog");
    let o = run(&["verify", "--suite", "bogoliubov", "--artifact", &artifact(), "--out", dir.to_str().unwrap()]);
    let v = stdout_json(&o);
    assert!(o.status.success(), "{v}");
    let rows = v["oracle_rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!((rows[0]["oracle"].as_f64().unwrap() + 0.25).abs() < 1e-6);
    assert!(dir.join("verify_bogoliubov.json").exists());
}

#[test]
fn traces_emit_one_row_per_cutoff_and_sector() {
    let dir = scratch("traces");
    let d = dir.to_str().unwrap();
    let o = run(&["traces", "--artifact", &artifact(), "--out", d, "--k-cutoff", "20,40,inf", "--l-max", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("traces.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3 * 8);
    assert!(csv.starts_with(&format!("# source_checksum = {}", manifest(&dir, "traces")["source_checksum"].as_str().unwrap())));
    let v = stdout_json(&o);
    let t = v["traces"].as_array().unwrap();
    assert!(t.iter().all(|r| r["trace_sqrt_h_minus_one"].as_f64().unwrap() < 0.0));

    // The bound accepts the report of the same artifact and refuses a foreign one.
    let o = run(&["bound", "--artifact", &artifact(), "--out", d, "--traces", dir.join("traces.json").to_str().unwrap(), "--k-cutoff", "20,40,inf", "--l-max", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let other = scratch("other");
    let cfg = other.join("run.cfg");
    std::fs::write(&cfg, "n = 1600\n").unwrap();
    assert!(run(&["solve", "--config", cfg.to_str().unwrap(), "--out", other.to_str().unwrap()]).status.success());
    let o = run(&[
        "bound",
        "--artifact",
        other.join("pekar.json").to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--traces",
        dir.join("traces.json").to_str().unwrap(),
        "--k-cutoff",
        "inf",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("provenance"));
}

#[test]
fn bound_writes_one_table_per_alpha_and_metadata() {
    let dir = scratch("bound");
    let o = run(&["bound", "--artifact", &artifact(), "--out", dir.to_str().unwrap(), "--alpha", "10,20", "--p-list", "0,0.005,0.01", "--l-max", "7"]);
    let v = stdout_json(&o);
    assert!(o.status.success(), "{v}");
    let m = manifest(&dir, "bound");
    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["bound_alpha_10.csv", "bound_alpha_20.csv", "bound_meta.json"]);
    assert!(v["error_term"]["constant"].is_null());
    assert_eq!(v["constants"]["source_checksum"], m["source_checksum"]);
    let csv = std::fs::read_to_string(dir.join("bound_alpha_10.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    // |P|/α above c is a usage error.
    let o = run(&["bound", "--artifact", &artifact(), "--out", dir.to_str().unwrap(), "--alpha", "10", "--p-list", "11", "--l-max", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn weights_at_rest_use_a_single_angular_node() {
    let dir = scratch("weights");
    let o = run(&["weights", "--artifact", &artifact(), "--out", dir.to_str().unwrap(), "--alpha", "10,20", "--p-list", "0", "--l-max", "4"]);
    let v = stdout_json(&o);
    assert!(o.status.success(), "{v}");
    let csv = std::fs::read_to_string(dir.join("weights_alpha_10_P_0.csv")).unwrap();
    let cosines: std::collections::BTreeSet<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(cosines.len(), 1);
    assert_eq!(v["norms"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(manifest(&dir, "weights")["files"].as_array().unwrap().len(), 3);
}

#[test]
fn derived_outputs_are_reproducible() {
    let a = scratch("repro-a");
    let b = scratch("repro-b");
    for d in [&a, &b] {
        let o = run(&["oracle", "--artifact", &artifact(), "--out", d.to_str().unwrap(), "--l-max", "4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(a.join("oracle.json")).unwrap(), std::fs::read(b.join("oracle.json")).unwrap());
}
