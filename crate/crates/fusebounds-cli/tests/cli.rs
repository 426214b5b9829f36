//! End-to-end checks of the command-line contract: exit codes, report
//! determinism across runs and thread counts, and diagnostic plumbing.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fusebounds"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Deterministic two-arm CSV fixture; `noise_z = 0` makes z an exact linear
/// function of x.
fn write_fixture(path: &Path, n: usize, noise_z: f64) {
    let mut rng_state = 0x12345678u64;
    let mut next = move || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    let gauss = |u1: f64, u2: f64| {
        (-2.0 * u1.max(1e-12).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut body = String::from("x1,x2,r,y,z\n");
    for i in 0..n {
        let x1 = gauss(next(), next());
        let x2 = gauss(next(), next());
        let mean = 0.8 * x1 - 0.4 * x2;
        if i % 2 == 0 {
            let y = mean + 0.3 * gauss(next(), next());
            body.push_str(&format!("{x1},{x2},1,{y},\n"));
        } else {
            let z = mean + noise_z * gauss(next(), next());
            body.push_str(&format!("{x1},{x2},0,,{z}\n"));
        }
    }
    std::fs::write(path, body).unwrap();
}

#[test]
fn analyze_reports_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_fixture(&data, 200, 0.3);
    let data = data.to_str().unwrap();

    let base = [
        "analyze",
        "--data",
        data,
        "--estimand",
        "product",
        "--seed",
        "42",
        "--known-propensity",
        "0.5",
    ];
    let first = run(&base);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(&base);
    let mut with_threads: Vec<&str> = base.to_vec();
    with_threads.extend(["--threads", "4"]);
    let third = run(&with_threads);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.stdout, third.stdout);
}

#[test]
fn analyze_alpha_widening_narrows_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_fixture(&data, 200, 0.3);
    let data = data.to_str().unwrap();

    let interval = |alpha: &str| -> (f64, f64) {
        let out = run(&[
            "analyze",
            "--data",
            data,
            "--seed",
            "1",
            "--alpha",
            alpha,
            "--known-propensity",
            "0.5",
        ]);
        assert!(out.status.success());
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (
            report["interval"]["lcb"].as_f64().unwrap(),
            report["interval"]["ucb"].as_f64().unwrap(),
        )
    };
    let tight = interval("0.05");
    let loose = interval("0.10");
    assert!(loose.0 > tight.0);
    assert!(loose.1 < tight.1);
}

#[test]
fn analyze_flags_degenerate_variance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_fixture(&data, 200, 0.0);
    let out = run(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--seed",
        "3",
        "--known-propensity",
        "0.5",
        "--variance-floor",
        "1e-4",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        report["interval"]["diagnostics"]["flags"]["degenerate_variance"],
        serde_json::Value::Bool(true)
    );
}

#[test]
fn analyze_rejects_bad_rows_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "x1,r,y,z\n0.1,1,2.5,\n0.2,1,1.0,9.9\n0.3,0,,1.0\n").unwrap();
    let out = run(&["analyze", "--data", data.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn analyze_rejects_single_arm_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("onearm.csv");
    std::fs::write(&data, "x1,r,y,z\n0.1,1,2.5,\n0.2,1,1.0,\n").unwrap();
    let out = run(&["analyze", "--data", data.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["analyze"]); // missing --data
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["simulate", "--spec", "heavy-tail"]); // missing --seed
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn version_flag_prints_build_identifier() {
    let out = run(&["--version"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(env!("CARGO_PKG_VERSION")), "stdout: {stdout}");
}

#[test]
fn simulate_reports_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    let base = |out: &Path, threads: &str| {
        let status = bin()
            .args([
                "simulate",
                "--spec",
                "validation",
                "--n",
                "120",
                "--reps",
                "6",
                "--seed",
                "9",
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    base(&out_a, "1");
    base(&out_b, "4");
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());
}

#[test]
fn simulate_sweep_emits_table() {
    let out = run(&[
        "simulate",
        "--spec",
        "gaussian",
        "--n",
        "150",
        "--reps",
        "4",
        "--seed",
        "11",
        "--sigma-z",
        "0.2",
        "--sweep-sigma-y",
        "0.2,0.4",
        "--p-x",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sweep = report["sweep"].as_array().unwrap();
    assert_eq!(sweep.len(), 2);
    assert_eq!(sweep[0]["parameter"].as_f64().unwrap(), 0.2);
    assert!(sweep[0]["mean_width"].as_f64().unwrap() > 0.0);
    assert!(sweep[0]["coverage_mc_halfwidth"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["results"].as_array().unwrap().len(), 2);
}

#[test]
fn oracle_check_passes_and_reports() {
    let out = run(&["oracle-check", "--instances", "50", "--location-scale", "20", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert!(report["max_sandwich_violation"].as_f64().unwrap() <= 1e-10);
    assert!(report["max_tightness_gap"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn oracle_check_with_no_instances_is_a_usage_error() {
    let out = run(&["oracle-check", "--instances", "0", "--location-scale", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
