use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn multiand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiand"))
        .args(args)
        .env_remove("MULTIAND_WORKERS")
        .output()
        .expect("binary runs")
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> (i32, String) {
    let v: Value = serde_json::from_slice(&out.stderr).expect("error object on stderr");
    let code = out.status.code().unwrap();
    assert_eq!(v["error"]["exit_code"], code);
    (code, v["error"]["kind"].as_str().unwrap().to_string())
}

const THIRD: &str = r#"{"k": 2, "mass": {"00": 0.3333333333333333, "01": 0.3333333333333333, "10": 0.3333333333333334}}"#;

#[test]
fn ic_on_two_unit_vectors_is_one_bit() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "u.json", r#"{"k": 2, "mass": {"10": 0.5, "01": 0.5}}"#);
    let v = stdout_json(&multiand(&["ic", "--measure", s(&m)]));
    assert!((v["external_bits"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(v["internal_bits"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn ic_on_point_mass_is_zero() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "p.json", r#"{"k": 3, "mass": {"000": 1.0}}"#);
    let v = stdout_json(&multiand(&["ic", "--measure", s(&m)]));
    assert_eq!(v["external_bits"], 0.0);
    assert_eq!(v["internal_bits"], 0.0);
    assert_eq!(v["per_player_bits"], serde_json::json!([0.0, 0.0, 0.0]));
}

#[test]
fn maximize_two_party_constant() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.csv");
    let v = stdout_json(&multiand(&["maximize", "--zero", "11", "--trace", s(&trace)]));
    assert!((v["value"].as_f64().unwrap() - 0.4827).abs() <= 5e-4);
    assert_eq!(v["status"], "converged");
    let csv = std::fs::read_to_string(trace).unwrap();
    assert!(csv.starts_with("evaluation,phase,best,simplex_size\n"));
}

#[test]
fn uniform_table_matches_closed_forms() {
    let out = multiand(&["uniform", "--k", "2,3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,closed_external,closed_internal,external_bits,internal_bits,error");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,1.0,0.0,"));
}

#[test]
fn concavity_grid_is_clean() {
    let out = multiand(&["verify-concavity", "--k", "3", "--beta", "0.1,0.4", "--eps", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "k,s,beta,eps,ext_deficit,int_deficit,taylor_ext,taylor_int,residual_ext,residual_int,flags"
    );
    // beta = 0.4 is not below 1/3 and is skipped
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping k=3"));
}

#[test]
fn discretize_table() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "third.json", THIRD);
    let out = multiand(&["discretize", "--measure", s(&m), "--delta", "0.25,0.125", "-T", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("delta,horizon,nodes,external_bits,internal_bits,external_gap,internal_gap\n"));
}

#[test]
fn sweeps_do_not_depend_on_worker_count() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_multiand"))
            .args(["continuity-check", "--pairs", "12", "--seed", "9"])
            .env("MULTIAND_WORKERS", workers)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("3"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 13);
}

#[test]
fn simulate_signal_from_file() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "third.json", THIRD);
    let sig = file(&dir, "sig.json", r#"{"sender": 2, "p0_given_0": 1.0, "p0_given_1": 0.0}"#);
    let args = ["simulate-signal", "--measure", s(&m), "--signal", s(&sig), "--traces", "50", "--seed", "3", "--dump", "1"];
    let first = multiand(&args);
    let v = stdout_json(&first);
    assert_eq!(v["signal"]["sender"], 2);
    assert_eq!(v["law"]["traces"], 50);
    assert_eq!(v["law"]["violations"], 0);
    assert_eq!(v["traces"].as_array().unwrap().len(), 1);
    assert_eq!(multiand(&args).stdout, first.stdout);
}

#[test]
fn errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let bad = file(&dir, "bad.json", "{not json");
    let outside = file(&dir, "outside.json", r#"{"k": 3, "mass": {"110": 0.5, "000": 0.5}}"#);
    let missing = dir.path().join("missing.json");

    assert_eq!(error_of(&multiand(&["ic", "--measure", s(&bad)])), (3, "malformed_input".into()));
    assert_eq!(error_of(&multiand(&["ic", "--measure", s(&outside)])), (4, "assumption_violated".into()));
    assert_eq!(error_of(&multiand(&["ic", "--measure", s(&missing)])), (7, "io".into()));
    assert_eq!(error_of(&multiand(&["ic", "--measure", s(&bad), "--bogus"])), (2, "usage".into()));
    assert_eq!(
        error_of(&multiand(&["continuity-check", "--max-delta", "0.5"])),
        (4, "assumption_violated".into())
    );
}

#[test]
fn output_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("u.json");
    let run = multiand(&["uniform", "--k", "4", "-o", s(&out)]);
    assert!(run.status.success());
    assert!(run.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v[0]["k"], 4);
}
