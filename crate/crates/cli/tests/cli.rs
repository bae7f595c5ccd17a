//! End-to-end runs of the `solitonlab` binary, one per exit-code path.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_solitonlab"));
    cmd.env_remove("SOLITONLAB_TOL");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["solve", "--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn sphere_mean_curvature() {
    let out = run(&["sphere", "--family", "mean-curvature", "--lambda", "1"]);
    assert_eq!(code(&out), 0);
    let r = json(&out)["solutions"][0]["R"].as_f64().unwrap();
    assert!((r - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sphere_without_solution_exits_two() {
    let out = run(&["sphere", "--family", "power-mean", "--beta", "2", "--lambda", "-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn solve_sphere_height_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("profile.csv");
    let out = run(&[
        "solve",
        "--family",
        "mean-curvature",
        "--lambda",
        "1",
        "--b",
        "1.4142135623730951",
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let header = json(&out);
    assert!(header["failure"].is_null());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().count() > 10);
    assert!(!text.contains('\r'));
}

#[test]
fn solve_off_sphere_records_outcome() {
    let out = run(&["solve", "--family", "mean-curvature", "--lambda", "1", "--b", "0.5"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["termination"].is_string());
}

#[test]
fn solve_lambda_zero_is_weingarten_note() {
    let out = run(&["solve", "--family", "power-mean", "--beta", "2", "--lambda", "0", "--b", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["mode"], "weingarten");
}

#[test]
fn solve_numerical_failure_exits_three() {
    let out = run(&["solve", "--family", "power-mean", "--beta", "2", "--lambda", "1", "--b", "3"]);
    assert_eq!(code(&out), 3);
    assert!(!json(&out)["failure"].is_null());
}

#[test]
fn pinch_off_sphere_is_not_coincident() {
    let out = run(&["pinch", "--family", "mean-curvature", "--lambda", "1", "--b", "0.5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["sphere_coincident"], false);
}

#[test]
fn verify_sphere_passes_and_coarse_step_fails() {
    let out = run(&["verify", "--profile", "sphere", "--R", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["passed"], true);
    let out = run(&["verify", "--profile", "sphere", "--R", "1", "--h", "0.05"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn scan_quadratic_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let boundary = dir.path().join("boundary.csv");
    let out = run(&[
        "scan",
        "--family",
        "quadratic-hk",
        "--a",
        "1",
        "--b",
        "1",
        "--n-h",
        "20",
        "--n-k",
        "40",
        "--boundary",
        path_str(&boundary),
    ]);
    assert_eq!(code(&out), 0);
    let grid = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grid.lines().next(), Some("H,K,indicator,class"));
    assert_eq!(grid.lines().count(), 1 + 20 * 40);
    let b = fs::read_to_string(&boundary).unwrap();
    assert_eq!(b.lines().next(), Some("H,K_boundary"));
}

#[test]
fn shoot_finds_sphere_height() {
    let out = run(&["shoot", "--family", "mean-curvature", "--lambda", "1", "--b-min", "1.2", "--b-max", "1.6"]);
    assert_eq!(code(&out), 0);
    let roots = json(&out)["roots"].as_array().unwrap().clone();
    assert!(roots.iter().any(|r| (r["b"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-4));
}

#[test]
fn shoot_without_sign_change_exits_two() {
    let out = run(&["shoot", "--family", "mean-curvature", "--lambda", "1", "--b-min", "0.3", "--b-max", "0.6"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_errors_exit_one() {
    assert_eq!(code(&run(&["sphere", "--family", "no-such-family"])), 1);
    assert_eq!(code(&run(&[])), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"command\": \"sphere\", \"speed\": 3}").unwrap();
    assert_eq!(code(&run(&["--config", path_str(&bad)])), 1);
    assert_eq!(code(&run(&["--config", path_str(&dir.path().join("missing.json"))])), 1);

    let out = bin()
        .args(["sphere", "--family", "mean-curvature", "--lambda", "1"])
        .env("SOLITONLAB_TOL", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let out = bin()
        .args(["sphere", "--family", "mean-curvature", "--lambda", "1"])
        .env("SOLITONLAB_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn env_tolerance_reaches_the_config() {
    let out = bin()
        .args(["solve", "--family", "mean-curvature", "--lambda", "1", "--b", "0.5", "--dump-config"])
        .env("SOLITONLAB_TOL", "1e-7")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["problem"]["tol"].as_f64(), Some(1e-7));
}

#[test]
fn dumped_config_runs_identically() {
    let args = ["pinch", "--family", "mean-curvature", "--lambda", "1", "--b", "2.5"];
    let dump = run(&[&args[..], &["--dump-config"]].concat());
    assert_eq!(code(&dump), 0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, &dump.stdout).unwrap();
    let direct = run(&args);
    let from_file = run(&["--config", path_str(&cfg)]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(direct.stdout, from_file.stdout);
}
