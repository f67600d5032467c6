//! End-to-end runs of the `baggls` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn baggls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baggls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = baggls(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    baggls(args).status.code().expect("exit code")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

/// Reruns with the same flags but writing into another directory; every
/// listed file must match byte for byte once the output path is removed.
fn assert_rerun_identical(args: &[&str], out_flag: &str, files: &[&str]) {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        let d = dir.path().to_str().unwrap();
        full.extend([out_flag, d]);
        ok(&full);
    }
    for f in files {
        let strip = |dir: &TempDir| read(dir.path(), f).replace(dir.path().to_str().unwrap(), "<out>");
        assert_eq!(strip(&a), strip(&b), "{f} differs between reruns");
    }
}

fn simulate(dir: &Path, n: &str, d: &str, seed: &str) {
    ok(&["simulate", "--n", n, "--d", d, "--seed", seed, "--out-dir", dir.to_str().unwrap()]);
}

fn fit_args(dir: &Path) -> Vec<String> {
    vec![
        "fit".into(),
        "--design".into(),
        path(dir, "design.csv"),
        "--indicator".into(),
        path(dir, "indicator.csv"),
        "--response".into(),
        path(dir, "response.csv"),
    ]
}

#[test]
fn simulate_writes_the_full_design() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "500", "10", "1");
    let header = read(dir.path(), "design.csv").lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 56);
    assert_eq!(read(dir.path(), "design.csv").lines().count(), 501);
    assert_eq!(read(dir.path(), "response.csv").lines().next(), Some("y"));
    let truth = json(dir.path(), "truth.json");
    assert_eq!(truth["format_version"], 1);
    assert_eq!(truth["p"], 56);
    assert!((truth["sparsity_ratio"].as_f64().unwrap() - 2.8575).abs() < 1e-4);
    let indicator = read(dir.path(), "indicator.csv");
    assert!(indicator.starts_with("effect,center,scale,m1,"));
    assert_eq!(indicator.lines().count(), 57);
}

#[test]
fn simulate_minimal_and_deterministic() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "2", "2", "0");
    assert_eq!(read(dir.path(), "design.csv").lines().count(), 3);
    let files = ["features.csv", "design.csv", "indicator.csv", "response.csv", "truth.json"];
    assert_rerun_identical(&["simulate", "--n", "50", "--d", "3", "--seed", "7"], "--out-dir", &files);
}

#[test]
fn simulate_rejects_bad_flags() {
    assert_eq!(code(&["simulate", "--n", "1", "--d", "3"]), 2);
    assert_eq!(code(&["simulate", "--n", "10", "--d", "3", "--beta-star", "1,2"]), 2);
    assert_eq!(code(&["simulate", "--d", "3"]), 2);
}

#[test]
fn fit_recovers_the_active_terms() {
    let data = TempDir::new().unwrap();
    simulate(data.path(), "500", "10", "1");
    let out = TempDir::new().unwrap();
    let mut args = fit_args(data.path());
    args.extend(["--delta-cross-term", "--samples", "100", "--out"].map(String::from));
    args.push(out.path().to_str().unwrap().into());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);

    let ranking = read(out.path(), "ranking.csv");
    let top: Vec<&str> = ranking.lines().skip(1).take(3).map(|l| l.split(',').nth(1).unwrap()).collect();
    for target in ["m1", "m2", "m1:m2"] {
        assert!(top.contains(&target), "{target} not in top 3: {top:?}");
    }
    assert_eq!(ranking.lines().count(), 56, "header plus every non-intercept effect");
    let fit = json(out.path(), "fit.json");
    assert_eq!(fit["converged"], true);
    assert_eq!(fit["config"]["fit"]["delta_cross_term"], true);
    assert!(fit["coefficients"][1]["interval"].is_array());
    assert_eq!(read(out.path(), "samples.csv").lines().count(), 101);
    assert!(json(out.path(), "timing.json")["fit_seconds"].is_number());
}

#[test]
fn fit_reruns_are_identical() {
    let data = TempDir::new().unwrap();
    simulate(data.path(), "120", "4", "3");
    let mut args = fit_args(data.path());
    args.extend(["--samples", "20", "--seed", "4"].map(String::from));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_rerun_identical(&args, "--out", &["fit.json", "ranking.csv", "samples.csv"]);
}

#[test]
fn fit_flags_and_errors() {
    let data = TempDir::new().unwrap();
    simulate(data.path(), "60", "3", "2");
    let out = TempDir::new().unwrap();
    let mut args = fit_args(data.path());
    args.extend(["--max-sweeps", "1", "--out"].map(String::from));
    args.push(out.path().to_str().unwrap().into());
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&argv);
    let fit = json(out.path(), "fit.json");
    assert_eq!(fit["converged"], false);
    assert_eq!(fit["sweeps_used"], 1);

    // Missing --indicator is a usage error.
    let response = path(data.path(), "response.csv");
    let design = path(data.path(), "design.csv");
    assert_eq!(code(&["fit", "--design", &design, "--response", &response]), 2);

    // A response of the wrong length names both shapes.
    let short = TempDir::new().unwrap();
    fs::write(short.path().join("y.csv"), "y\n0\n1\n").unwrap();
    let indicator = path(data.path(), "indicator.csv");
    let bad = baggls(&["fit", "--design", &design, "--indicator", &indicator, "--response", &path(short.path(), "y.csv")]);
    assert_eq!(bad.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("60 rows") && msg.contains("has 2"), "{msg}");

    // Non-numeric design entries report the line.
    let broken = short.path().join("design.csv");
    let mut text = read(data.path(), "design.csv");
    text = text.replacen("\n1,", "\n1,abc,", 1);
    fs::write(&broken, text).unwrap();
    let out = baggls(&["fit", "--design", broken.to_str().unwrap(), "--indicator", &indicator, "--response", &response]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn benchmark_writes_runs_and_aggregates() {
    let out = TempDir::new().unwrap();
    let dir = out.path().to_str().unwrap();
    ok(&["benchmark", "--grid", "500x10", "--reps", "3", "--holdout-n", "1000", "--out-dir", dir]);
    let runs = read(out.path(), "runs.csv");
    assert_eq!(runs.lines().count(), 4);
    assert!(runs.starts_with("scenario,n,d,p,repetition,estimator,seed,rmse"));
    let agg = json(out.path(), "aggregates.json");
    assert_eq!(agg["aggregates"].as_array().unwrap().len(), 1);
    assert_eq!(agg["aggregates"][0]["runs"], 3);
    assert_eq!(agg["config"]["grid"][0], "500x10");
}

#[test]
fn benchmark_is_deterministic_and_validates_scenarios() {
    let args = [
        "benchmark",
        "--grid",
        "150x4,200x3",
        "--reps",
        "2",
        "--holdout-n",
        "500",
        "--estimators",
        "baggls,baggls-conjugate",
        "--seed",
        "9",
    ];
    assert_rerun_identical(&args, "--out-dir", &["runs.csv", "aggregates.json"]);
    assert_eq!(code(&["benchmark", "--grid", "500by10"]), 2);
    assert_eq!(code(&["benchmark", "--estimators", "lasso"]), 2);
    assert_eq!(code(&["benchmark", "--reps", "0"]), 2);
}

const FIMO: &str = "\
motif_id\tmotif_alt_id\tsequence_name\tstart\tstop\tstrand\tscore\tp-value\tq-value\tmatched_sequence
A\t\ts1\t1\t4\t+\t10\t1e-5\t0.1\tACGT
B\t\ts1\t5\t8\t-\t10\t2e-5\t0.1\tACGT
A\t\ts2\t3\t6\t+\t10\t3e-5\t0.1\tACGT
B\t\ts2\t1\t2\t+\t10\t3e-5\t0.1\tACGT
C\t\ts3\t2\t5\t+\t10\t5e-5\t0.1\tACGT
A\t\ts4\t1\t3\t+\t10\t2e-4\t0.1\tACG
C\t\ts4\t4\t8\t+\t10\t5e-6\t0.1\tACGTA
";

const TRACKS: &str = "\
sequence_id,label,p0,p1,p2,p3,p4,p5,p6,p7
s1,1,1,-1,1,-1,0.5,0.5,0.5,0.5
s2,1,0.2,0.2,0.9,0.9,0.9,0.9,0,0
s3,0,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1
s4,0,0.3,0.3,0.3,0.3,0.3,0.3,0.3,0.3
s5,0,0,0,0,0,0,0,0,0
";

fn corpus() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("fimo.tsv"), FIMO).unwrap();
    fs::write(dir.path().join("tracks.csv"), TRACKS).unwrap();
    dir
}

#[test]
fn ingest_builds_a_fittable_design() {
    let input = corpus();
    let out = TempDir::new().unwrap();
    let (fimo, tracks) = (path(input.path(), "fimo.tsv"), path(input.path(), "tracks.csv"));
    ok(&["ingest", "--fimo", &fimo, "--attributions", &tracks, "--out-dir", out.path().to_str().unwrap()]);
    let features = read(out.path(), "features.csv");
    assert_eq!(features.lines().next(), Some("sequence_id,A,B,C"));
    assert_eq!(features.lines().nth(1), Some("s1,0.6666666666666666,0.3333333333333333,0"));
    assert_eq!(features.lines().nth(5), Some("s5,0,0,0"));
    let summary = json(out.path(), "ingest.json");
    assert_eq!(summary["config"]["p_threshold"], 1e-4);
    assert_eq!(summary["config"]["quantile"], 0.95);
    assert_eq!(summary["matches_kept"], 6);
    // Only A and B co-occur, so the single candidate pair is retained.
    assert_eq!(summary["p"], 5);
    assert_eq!(read(out.path(), "design.csv").lines().next(), Some("(intercept),A,B,C,A:B"));

    // The output is accepted by `fit`.
    let fit_out = TempDir::new().unwrap();
    let mut args = fit_args(out.path());
    args.extend(["--delta-cross-term", "--out"].map(String::from));
    args.push(fit_out.path().to_str().unwrap().into());
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&argv);
    assert_eq!(json(fit_out.path(), "fit.json")["p"], 5);
}

#[test]
fn ingest_with_zero_threshold_is_empty() {
    let input = corpus();
    let out = TempDir::new().unwrap();
    let (fimo, tracks) = (path(input.path(), "fimo.tsv"), path(input.path(), "tracks.csv"));
    let run = ok(&[
        "ingest",
        "--fimo",
        &fimo,
        "--attributions",
        &tracks,
        "--p-threshold",
        "0",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&run.stderr).contains("warning"));
    assert_eq!(json(out.path(), "ingest.json")["matches_kept"], 0);
    assert_eq!(read(out.path(), "features.csv").lines().next(), Some("sequence_id"));
    assert_eq!(read(out.path(), "design.csv").lines().next(), Some("(intercept)"));
}

#[test]
fn ingest_reports_parse_errors_with_context() {
    let input = corpus();
    fs::write(input.path().join("bad.tsv"), FIMO.replace("\t3\t6\t", "\tx\t6\t")).unwrap();
    let out = baggls(&[
        "ingest",
        "--fimo",
        &path(input.path(), "bad.tsv"),
        "--attributions",
        &path(input.path(), "tracks.csv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.tsv") && msg.contains("line 4"), "{msg}");
    assert_rerun_identical(
        &["ingest", "--fimo", &path(input.path(), "fimo.tsv"), "--attributions", &path(input.path(), "tracks.csv")],
        "--out-dir",
        &["features.csv", "design.csv", "indicator.csv", "response.csv", "ingest.json"],
    );
}

#[test]
fn oracle_reports_both_variants() {
    let out = TempDir::new().unwrap();
    let dir = out.path().to_str().unwrap();
    ok(&["oracle", "--n", "200", "--d", "5", "--iterations", "3000", "--burn-in", "500", "--seed", "2", "--out-dir", dir]);
    let report = json(out.path(), "agreement.json");
    let variants = report["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    assert_eq!(variants[0]["variant"], "baggls");
    assert_eq!(variants[1]["variant"], "baggls-conjugate");
    assert!(variants[1]["correlation"].as_f64().unwrap() > 0.9);
    assert_eq!(report["config"]["iterations"], 3000);
    assert_eq!(code(&["oracle", "--iterations", "100", "--burn-in", "100"]), 2);
    assert_rerun_identical(
        &["oracle", "--n", "80", "--d", "3", "--iterations", "600", "--burn-in", "100", "--seed", "5"],
        "--out-dir",
        &["agreement.json"],
    );
}

#[test]
fn oracle_refuses_wide_designs() {
    let data = TempDir::new().unwrap();
    simulate(data.path(), "40", "33", "1");
    let out = baggls(&[
        "oracle",
        "--design",
        &path(data.path(), "design.csv"),
        "--indicator",
        &path(data.path(), "indicator.csv"),
        "--response",
        &path(data.path(), "response.csv"),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("500"));
}
