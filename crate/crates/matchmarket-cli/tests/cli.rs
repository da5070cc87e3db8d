//! End-to-end behavior of the binary: determinism, formats, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matchmarket"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("matchmarket-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "simulate",
        "--lambda-a",
        "8",
        "--lambda-b",
        "8",
        "--p",
        "0.2",
        "--horizon",
        "15",
        "--reps",
        "2",
        "--seed",
        "11",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn simulate_all_emits_five_rows_on_coupled_randomness() {
    let out = run(&[
        "simulate",
        "--lambda-a",
        "8",
        "--lambda-b",
        "8",
        "--p",
        "0.2",
        "--horizon",
        "15",
        "--reps",
        "2",
        "--seed",
        "11",
        "--policy",
        "all",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("policy,"))
        .collect();
    assert_eq!(data_rows.len(), 5);
    let names: Vec<&str> = data_rows
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(
        names,
        ["greedy2", "patient2", "greedy1", "patient1", "omniscient"]
    );
    // Config echo precedes the header.
    assert!(text.starts_with("# config: {"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempdir("config");
    let cfg = write_config(
        &dir,
        "run.json",
        r#"{"lambda_a": 8.0, "lambda_b": 8.0, "p": 0.2, "horizon": 15.0, "replications": 2, "seed": 1}"#,
    );
    let from_config = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(from_config.status.success());
    let overridden = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert!(overridden.status.success());
    assert_ne!(stdout(&from_config), stdout(&overridden));
    assert!(stdout(&overridden).contains("\"seed\":11"));
}

#[test]
fn malformed_config_fails_with_nonzero_exit() {
    let dir = tempdir("badcfg");
    let cfg = write_config(&dir, "bad.json", "{not json");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("cannot parse"), "stderr: {err}");
}

#[test]
fn missing_params_fail_with_nonzero_exit() {
    let out = run(&["simulate", "--lambda-a", "8"]);
    assert!(!out.status.success());
}

#[test]
fn invalid_params_fail_with_nonzero_exit() {
    let out = run(&[
        "simulate",
        "--lambda-a",
        "8",
        "--lambda-b",
        "8",
        "--p",
        "1.5",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("edge probability"), "stderr: {err}");
}

#[test]
fn bounds_json_matches_desk_arithmetic() {
    let out = run(&[
        "bounds",
        "--lambda-a",
        "100",
        "--lambda-b",
        "100",
        "--p",
        "0.05",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let opt = doc["opt_lower"].as_f64().unwrap();
    assert!((opt - 1.0 / 16.75).abs() < 1e-9);
    assert!(doc["regime_flags"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_roots_only_emits_just_the_rootset() {
    let out = run(&[
        "bounds",
        "--lambda-a",
        "100",
        "--lambda-b",
        "100",
        "--p",
        "0.05",
        "--roots-only",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc.get("k2").is_some());
    assert!(doc.get("opt_lower").is_none());
    assert!((doc["k2"].as_f64().unwrap() - 26.15).abs() < 0.01);
}

#[test]
fn stationary_writes_distribution_and_functionals() {
    let dir = tempdir("stationary");
    let dist_path = dir.join("dist.csv");
    let out = run(&[
        "stationary",
        "--lambda-a",
        "0.5",
        "--lambda-b",
        "0.5",
        "--p",
        "0.25",
        "--policy",
        "greedy2",
        "--out",
        dist_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&dist_path).unwrap();
    assert!(csv.starts_with("i,j,prob\n"));
    assert!(csv.lines().last().unwrap().starts_with("# leak="));
    let functionals: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("dist.functionals.json")).unwrap())
            .unwrap();
    assert!(functionals["functionals"]["loss_total"].as_f64().unwrap() > 0.0);
    // The origin carries the most mass in a tiny market.
    let top = csv
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .max_by(|a, b| {
            let pa: f64 = a.rsplit(',').next().unwrap().parse().unwrap();
            let pb: f64 = b.rsplit(',').next().unwrap().parse().unwrap();
            pa.total_cmp(&pb)
        })
        .unwrap();
    assert!(top.starts_with("0,0,"), "top cell: {top}");
}

#[test]
fn undersized_grid_suggests_a_larger_one() {
    let out = run(&[
        "stationary",
        "--lambda-a",
        "30",
        "--lambda-b",
        "30",
        "--p",
        "0.1",
        "--policy",
        "patient2",
        "--grid",
        "6x6",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("retry with a grid"), "stderr: {err}");
}

#[test]
fn csv_output_is_append_safe() {
    let dir = tempdir("append");
    let path = dir.join("rows.csv");
    let _ = std::fs::remove_file(&path);
    let args = [
        "simulate",
        "--lambda-a",
        "8",
        "--lambda-b",
        "8",
        "--p",
        "0.2",
        "--horizon",
        "10",
        "--reps",
        "1",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    assert!(run(&args).status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let headers = text.lines().filter(|l| l.starts_with("policy,")).count();
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("policy,"))
        .count();
    assert_eq!(headers, 1);
    assert_eq!(rows, 2);
}

#[test]
fn compare_single_point_composes_simulation_and_bounds() {
    let dir = tempdir("compare");
    let cfg = write_config(
        &dir,
        "compare.json",
        r#"{
            "lambda_a": 10.0, "lambda_b": 10.0, "p": 0.2,
            "horizon": 20.0, "replications": 3, "seed": 5, "burn_in": 4.0,
            "policies": ["greedy2", "patient2"],
            "format": "json"
        }"#,
    );
    let out = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for row in results {
        assert!(row["sim_loss_total"].as_f64().unwrap() >= 0.0);
        assert!(row["stat_loss_total"].as_f64().unwrap() > 0.0);
        assert!(row["upper_total"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn compare_accepts_a_sweep_only_config() {
    let dir = tempdir("sweep-only");
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{
            "horizon": 12.0, "replications": 2, "seed": 1,
            "policies": ["greedy2"],
            "sweep": [
                { "lambda_a": 8.0, "lambda_b": 8.0, "p": 0.2 },
                { "lambda_a": 12.0, "lambda_b": 6.0, "p": 0.15 }
            ]
        }"#,
    );
    let out = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8(out.stderr).unwrap());
    let rows = stdout(&out)
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("lambda_a,"))
        .count();
    assert_eq!(rows, 2);
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = [
        "simulate",
        "--lambda-a",
        "8",
        "--lambda-b",
        "8",
        "--p",
        "0.2",
        "--horizon",
        "15",
        "--reps",
        "4",
        "--seed",
        "11",
    ];
    let default_pool = run(&args);
    let single = bin()
        .args(args)
        .env("MATCHMARKET_THREADS", "1")
        .output()
        .unwrap();
    assert!(single.status.success());
    assert_eq!(default_pool.stdout, single.stdout);
}

#[test]
fn diagnose_prints_pass_fail_table() {
    let out = run(&[
        "diagnose",
        "--lambda-a",
        "10",
        "--lambda-b",
        "10",
        "--p",
        "0.2",
        "--policy",
        "greedy2",
        "--reps",
        "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("balance_residual"));
    assert!(text.contains("PASS greedy2_tail_a"));
}
