//! End-to-end tests of the `batchpred` binary: exit codes, output format,
//! documented example values, and byte-identical reruns.

use batchpred::predictors::BetaParam;
use batchpred::regret_memoryless::theorem2_boundary_check;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchpred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Data rows of a CSV output: skips '#' comment lines and the header row.
fn data_rows(out: &Output) -> Vec<Vec<String>> {
    stdout_str(out)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cell_f64(rows: &[Vec<String>], row: usize, col: usize) -> f64 {
    rows[row][col].parse().expect("numeric cell")
}

#[test]
fn memoryless_single_row_nonnegative() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "0.5",
        "--n", "4",
        "--ell", "4",
        "--beta", "0.5",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(text.starts_with("# batchpred v"));
    assert!(text.contains("# config: "));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1);
    assert!(cell_f64(&rows, 0, 5) >= 0.0);
    assert_eq!(rows[0][6], "exact-single-sum");
}

#[test]
fn memoryless_boundary_matches_closed_form() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "1",
        "--n", "8",
        "--ell", "8",
        "--beta", "0.5",
    ]);
    assert!(out.status.success());
    let got = cell_f64(&data_rows(&out), 0, 5);
    let want = theorem2_boundary_check(64, 8, BetaParam::half()).unwrap().exact;
    assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
}

#[test]
fn ell_one_reduction_identical_across_predictors() {
    let mut values = Vec::new();
    for predictor in ["naive-train-only", "add-beta-batch"] {
        let out = run(&[
            "memoryless-regret",
            "--theta", "0.3",
            "--n", "6",
            "--ell", "1",
            "--beta", "0.5",
            "--predictor", predictor,
        ]);
        assert!(out.status.success());
        values.push(cell_f64(&data_rows(&out), 0, 5));
    }
    assert!((values[0] - values[1]).abs() <= 1e-10, "{values:?}");
}

#[test]
fn config_error_exits_2() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "0.5",
        "--n", "4",
        "--ell", "4",
        "--beta", "0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn beta_override_accepts_out_of_window() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "0.5",
        "--n", "4",
        "--ell", "4",
        "--beta", "0.3",
        "--beta-override",
    ]);
    assert!(out.status.success());
}

#[test]
fn budget_error_exits_3() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "0.5",
        "--n", "20000000",
        "--ell", "1",
        "--beta", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn predict_single_symbol_uniform() {
    let dir = std::env::temp_dir().join("batchpred-cli-test-uniform");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("data.txt");
    std::fs::write(&path, "test:1\n").unwrap();
    let out = run(&["predict", "--input", path.to_str().unwrap(), "--beta", "0.5"]);
    assert!(out.status.success());
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1);
    assert!((cell_f64(&rows, 0, 3) - 0.5).abs() < 1e-15);
    assert!((cell_f64(&rows, 0, 4) - (2.0f64).ln()).abs() < 1e-12);
}

#[test]
fn predict_documented_losses() {
    let dir = std::env::temp_dir().join("batchpred-cli-test-losses");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("data.txt");
    std::fs::write(&path, "11\ntest:11\n").unwrap();
    let out = run(&["predict", "--input", path.to_str().unwrap(), "--beta", "0.5"]);
    assert!(out.status.success());
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!((cell_f64(&rows, 0, 4) + (2.5f64 / 3.0).ln()).abs() < 1e-12);
    assert!((cell_f64(&rows, 1, 4) + (3.5f64 / 4.0).ln()).abs() < 1e-12);
}

#[test]
fn predict_ragged_input_exits_4() {
    let dir = std::env::temp_dir().join("batchpred-cli-test-ragged");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("data.txt");
    std::fs::write(&path, "101\n10\ntest:101\n").unwrap();
    let out = run(&["predict", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn theorem2_sweep_reports_pass() {
    let out = run(&["theorem-sweep", "--theorem", "2", "--t-max", "50"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(text.contains("# check boundary sandwich, zero violations: PASS"));
}

#[test]
fn markov_regret_brute_force_row() {
    let out = run(&[
        "markov-regret",
        "--p1", "0.4",
        "--p", "0.3",
        "--q", "0.6",
        "--n", "2",
        "--ell", "3",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&out);
    assert_eq!(rows[0][14], "brute-force");
    let total = cell_f64(&rows, 0, 8);
    let initial = cell_f64(&rows, 0, 10);
    let transition = cell_f64(&rows, 0, 12);
    assert!((total - initial - transition).abs() <= 1e-10);
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "theorem-sweep",
        "--theorem", "5",
        "--delta", "0.2",
        "--n-values", "8",
        "--ell-rule", "const:4",
        "--replicas", "100",
        "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_mirror_carries_same_rows() {
    let out = run(&[
        "memoryless-regret",
        "--theta", "0.5",
        "--n", "4",
        "--ell", "4",
        "--format", "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 1);
    assert!(doc["rows"][0]["regret"].as_f64().unwrap() >= 0.0);
    assert_eq!(doc["config"]["subcommand"], "memoryless-regret");
    assert!(doc["version"].is_string());
}
