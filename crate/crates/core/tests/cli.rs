use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mflq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflq"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("MFLQ_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = mflq(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn cell(line: &str, column: usize) -> f64 {
    line.split(',').nth(column).unwrap().parse().unwrap()
}

fn write_problem(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("problem.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn riccati_example() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["riccati", "--problem", "example", "--N", "1024"]);
    let p = read(dir.path(), "P.csv");
    let lines: Vec<&str> = p.lines().collect();
    assert_eq!(lines.len(), 1026);
    assert_eq!(lines[0], "k,t,P_0_0");
    assert!((cell(lines[1], 2) - 3.194528).abs() <= 0.02);
    assert!(dir.path().join("Pi.csv").is_file());
    assert!(!p.contains('\r'));
}

#[test]
fn riccati_reference_summary() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["riccati", "--N", "64", "--N-ref", "4096"]);
    let summary = json(dir.path(), "riccati_error.json");
    assert!(summary["Pi_error"].as_f64().unwrap() < 0.02);
    assert_eq!(read(dir.path(), "P_ref.csv").lines().count(), 4098);
}

#[test]
fn zero_problem_gives_zero_files() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(dir.path(), r#"{"n": 2, "m": 1, "T": 1.0, "x0": [1, 2], "R": [1]}"#);
    let problem = problem.to_str().unwrap();
    ok(dir.path(), &["riccati", "--problem", problem, "--N", "4"]);
    for name in ["P.csv", "Pi.csv"] {
        for line in read(dir.path(), name).lines().skip(1) {
            assert!(line.split(',').skip(2).all(|c| c == "0"), "{name}: {line}");
        }
    }
    ok(dir.path(), &["bsde", "--problem", problem, "--N", "4", "--M", "2"]);
    for name in ["adjoint_means.csv", "adjoint_paths.csv"] {
        let text = read(dir.path(), name);
        let skip = if name == "adjoint_paths.csv" { 3 } else { 2 };
        for line in text.lines().skip(1) {
            assert!(line.split(',').skip(skip).all(|c| c == "0" || c.is_empty()), "{name}: {line}");
        }
    }
}

#[test]
fn malformed_problem_names_the_key() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(dir.path(), r#"{"n": 1, "m": 1, "T": 1.0, "x0": [1], "R": [1], "Q": [1, 2]}"#);
    let out = mflq(dir.path(), &["riccati", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["key"], "Q");
    assert_eq!(err["error"], "InvalidProblemFile");
}

#[test]
fn assumption_violation_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(dir.path(), r#"{"n": 1, "m": 1, "T": 1.0, "x0": [1], "R": [-1]}"#);
    let out = mflq(dir.path(), &["simulate", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "AssumptionViolated");
}

#[test]
fn simulate_cost_near_optimal_value() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--problem", "example", "--N", "32", "--M", "10000", "--seed", "42"]);
    let cost = json(dir.path(), "cost.json");
    assert!((cost["J_tau"].as_f64().unwrap() - 2.463019).abs() <= 0.1);
    assert!(dir.path().join("means.csv").is_file());
    assert!(dir.path().join("moments.csv").is_file());
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["simulate", "--M", "1", "--seed", "7", "--dump-paths"];
    ok(a.path(), &args);
    ok(b.path(), &[&args[..], &["--workers", "3"]].concat());
    for name in ["means.csv", "moments.csv", "cost.json", "paths.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn zero_noise_hand_value() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--N", "2", "--M", "1", "--zero-noise"]);
    let means = read(dir.path(), "means.csv");
    let row = means.lines().nth(2).unwrap();
    assert!((cell(row, 2) - 6.0 / 7.0).abs() < 1e-15, "{row}");
}

#[test]
fn seed_from_environment_wins() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(a.path(), &["simulate", "--N", "8", "--M", "5", "--seed", "3"]);
    let out = Command::new(env!("CARGO_BIN_EXE_mflq"))
        .args(["simulate", "--N", "8", "--M", "5", "--seed", "999", "--out"])
        .arg(b.path())
        .env("MFLQ_SEED", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(a.path(), "moments.csv"), read(b.path(), "moments.csv"));
}

#[test]
fn converge_mean_slope() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["converge", "--problem", "example", "--levels", "4:10", "--M", "10000", "--seed", "1"]);
    let rates = json(dir.path(), "rates.json");
    let slope = rates["metrics"]["mean_x"]["slope"].as_f64().unwrap();
    assert!((0.85..=1.15).contains(&slope), "{slope}");
    let csv = read(dir.path(), "rates.csv");
    assert!(csv.starts_with("metric,N,tau,error,stderr,flag\n"));
}

#[test]
fn converge_single_level_is_insufficient() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["converge", "--levels", "4:4", "--M", "100"]);
    let rates = json(dir.path(), "rates.json");
    for (_, report) in rates["metrics"].as_object().unwrap() {
        assert_eq!(report["status"], "insufficient-levels");
        assert!(report["slope"].is_null());
    }
}

#[test]
fn converge_riccati_metric() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["converge", "--problem", "example", "--metric", "riccati"]);
    let rates = json(dir.path(), "rates.json");
    let slope = rates["metrics"]["riccati_Pi"]["slope"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");
    assert_eq!(rates["metrics"].as_object().unwrap().len(), 2);
}

#[test]
fn bsde_mean_y_at_start() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["bsde", "--problem", "example", "--N", "1024"]);
    let means = read(dir.path(), "adjoint_means.csv");
    assert!(means.starts_with("k,t,y_0,z_0,mean_y_0,mean_z_0\n"));
    let row = means.lines().nth(1).unwrap();
    assert!((cell(row, 4) - 2.463019).abs() <= 0.02);
}

#[test]
fn y_weights_differ_only_in_y() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(a.path(), &["bsde", "--N", "16", "--M", "3", "--y-weight", "p"]);
    ok(b.path(), &["bsde", "--N", "16", "--M", "3", "--y-weight", "pi"]);
    assert_eq!(read(a.path(), "adjoint_means.csv"), read(b.path(), "adjoint_means.csv"));
    let pa = read(a.path(), "adjoint_paths.csv");
    let pb = read(b.path(), "adjoint_paths.csv");
    let mut differs = false;
    for (la, lb) in pa.lines().zip(pb.lines()).skip(1) {
        let ca: Vec<&str> = la.split(',').collect();
        let cb: Vec<&str> = lb.split(',').collect();
        for (i, (x, y)) in ca.iter().zip(&cb).enumerate() {
            if i == 3 {
                differs |= x != y;
            } else {
                assert_eq!(x, y, "column {i}");
            }
        }
    }
    assert!(differs);
}

#[test]
fn bad_flags_exit_with_two() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["simulate", "--M", "0"][..],
        &["converge", "--levels", "1:3"],
        &["converge", "--metric", "bogus"],
        &["bsde", "--y-weight", "q"],
        &["riccati", "--N-ref", "100"],
    ] {
        let out = mflq(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["error"].is_string());
    }
}
