//! Integration tests driving the compiled binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dyncov")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("failed to spawn binary")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate_csv(dir: &Path, name: &str, seed: &str, length: &str) -> String {
    let path = dir.join(name).display().to_string();
    run_ok(&[
        "simulate", "--dim", "2", "--length", length, "--seed", seed, "--output", &path,
    ]);
    path
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_1_with_category() {
    let out = run(&["fit", "--input", "/nonexistent/returns.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
    assert!(stderr.contains("not found"), "stderr: {stderr}");
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_csv(dir.path(), "sim.csv", "11", "600");
    let fit_path = dir.path().join("fit.json").display().to_string();
    run_ok(&[
        "fit", "--input", &sim, "--restarts", "2", "--no-standardize", "--output", &fit_path,
    ]);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&fit_path).unwrap()).unwrap();
    let a = v["a"].as_array().unwrap();
    let b = v["b"].as_array().unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(b.len(), 2);
    // defaults of the simulate command: a = 0.9, b = 0.35 on the diagonal
    for ai in a {
        assert!((ai.as_f64().unwrap().abs() - 0.9).abs() < 0.15);
    }
    for bi in b {
        assert!((bi.as_f64().unwrap().abs() - 0.35).abs() < 0.2);
    }
    assert!(v["loglik"].as_f64().unwrap().is_finite());
}

#[test]
fn evaluate_is_reproducible_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_csv(dir.path(), "sim.csv", "3", "200");
    let args = |out: &str| {
        [
            "evaluate", "--input", &sim, "--methods", "BEKK,BMDC", "--particles", "200",
            "--warmup", "40", "--refit-every", "25", "--seed", "7",
            "--deterministic-timing", "--output", out,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
    };
    let out1 = dir.path().join("r1.csv").display().to_string();
    let out2 = dir.path().join("r2.csv").display().to_string();
    for out in [&out1, &out2] {
        let o = Command::new(bin()).args(args(out)).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    // companion outputs alongside the records CSV
    assert!(dir.path().join("r1.scores.csv").exists());
    assert!(dir.path().join("r1.summary.json").exists());
    assert!(dir.path().join("r1.manifest.json").exists());
}

#[test]
fn compare_reports_ranks_that_sum_correctly() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    std::fs::write(
        &scores,
        "method,d1,d2,d3\nBEKK,-1.2,-1.4,-1.1\nBMDC,-1.0,-1.5,-0.9\n",
    )
    .unwrap();
    let out = run_ok(&["compare", "--scores", scores.to_str().unwrap(), "--alpha", "0.05"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ranks = v["avg_ranks"].as_array().unwrap();
    assert_eq!(ranks.len(), 2);
    // with k = 2 the per-dataset ranks are {1, 2}, so averages sum to 3
    let sum: f64 = ranks.iter().map(|r| r.as_f64().unwrap()).sum();
    assert!((sum - 3.0).abs() < 1e-12, "rank sum {sum}");
    assert!(v["statistic"].as_f64().unwrap() >= 0.0);
    assert!(v["critical_distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn filter_writes_record_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_csv(dir.path(), "sim.csv", "9", "150");
    let out_path = dir.path().join("records.csv").display().to_string();
    run_ok(&[
        "filter", "--input", &sim, "--particles", "200", "--warmup", "30", "--seed", "2",
        "--output", &out_path,
    ]);
    let body = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = body.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("step,"), "header: {header}");
    // one record per post-warmup observation: 150 - 30 = 120
    assert_eq!(lines.count(), 120);
}
