//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fusion-lab"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout_of(output: &Output) -> &str {
    std::str::from_utf8(&output.stdout).expect("stdout is utf-8")
}

fn write_zero_matrix(dir: &Path, m: usize, n: usize) -> std::path::PathBuf {
    let path = dir.join("reports.txt");
    let row = vec!["0"; n].join(" ");
    let text = vec![row; m].join("\n");
    std::fs::write(&path, text + "\n").expect("write input");
    path
}

#[test]
fn fuse_reads_matrix_and_prints_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_zero_matrix(dir.path(), 10, 20);
    let output = run(&[
        "fuse",
        input.to_str().unwrap(),
        "--scheme",
        "mp",
        "--alpha",
        "0",
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = stdout_of(&output);
    let first_line = stdout.lines().next().unwrap();
    assert_eq!(first_line, "decisions: 0 0 0 0 0 0 0 0 0 0");
    assert!(stdout.contains("state_posteriors: "));
    assert!(stdout.contains("honesty_posteriors: "));
    assert!(stdout.contains("converged: "));
}

#[test]
fn fuse_json_object_carries_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_zero_matrix(dir.path(), 4, 6);
    let output = run(&[
        "fuse",
        input.to_str().unwrap(),
        "--alpha",
        "0.2",
        "--json",
    ]);
    assert!(output.status.success(), "{output:?}");
    let value: serde_json::Value = serde_json::from_str(stdout_of(&output)).unwrap();
    assert_eq!(value["decisions"].as_array().unwrap().len(), 4);
    assert_eq!(value["state_posteriors"].as_array().unwrap().len(), 4);
    assert_eq!(value["honesty_posteriors"].as_array().unwrap().len(), 6);
    assert!(value["iterations"].as_u64().unwrap() >= 1);
    assert!(value["converged"].is_boolean());
    assert!(value["log_evidence"].is_null());
}

#[test]
fn fuse_output_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_zero_matrix(dir.path(), 8, 5);
    let args = [
        "fuse",
        input.to_str().unwrap(),
        "--scheme",
        "soft",
        "--alpha",
        "0.3",
        "--seed",
        "9",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn oracle_reports_log_evidence_and_agrees_with_joint() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_zero_matrix(dir.path(), 3, 4);
    let windowed = run(&["oracle", input.to_str().unwrap(), "--alpha", "0.2"]);
    let joint = run(&[
        "oracle",
        input.to_str().unwrap(),
        "--alpha",
        "0.2",
        "--joint",
    ]);
    assert!(windowed.status.success());
    assert!(joint.status.success());
    let pick = |output: &Output| -> f64 {
        stdout_of(output)
            .lines()
            .find_map(|line| line.strip_prefix("log_evidence: "))
            .expect("log_evidence line")
            .parse()
            .unwrap()
    };
    assert!((pick(&windowed) - pick(&joint)).abs() < 1e-9);
}

#[test]
fn optimal_scheme_rejects_windows_beyond_the_enumeration_cap() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_zero_matrix(dir.path(), 25, 4);
    let output = run(&["fuse", input.to_str().unwrap(), "--scheme", "optimal"]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn malformed_matrix_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "0 1 0\n0 2 0\n").unwrap();
    let output = run(&["fuse", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");

    let missing = dir.path().join("nope.txt");
    let output = run(&["fuse", missing.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn simulate_rejects_zero_trials_and_unknown_sweeps() {
    let zero = run(&["simulate", "--n", "4", "--m", "3", "--trials", "0"]);
    assert_eq!(zero.status.code(), Some(2), "{zero:?}");

    let sweep = run(&[
        "simulate",
        "--n",
        "4",
        "--m",
        "3",
        "--trials",
        "10",
        "--sweep",
        "beta=0:0.1:0.4",
    ]);
    assert_eq!(sweep.status.code(), Some(2), "{sweep:?}");
}

#[test]
fn simulate_csv_parameters_round_trip_exactly() {
    let output = run(&[
        "simulate",
        "--n",
        "7",
        "--m",
        "4",
        "--epsilon",
        "0.15",
        "--rho",
        "0.95",
        "--alpha",
        "0.3",
        "--pmal",
        "0.7",
        "--trials",
        "80",
        "--seed",
        "5",
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = stdout_of(&output);
    let mut lines = stdout.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "scheme,n,m,epsilon,rho,alpha,pmal,pmal_fc,trials,pe,ci_low,ci_high,mean_iters,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "mp");
    assert_eq!(row[1].parse::<usize>().unwrap(), 7);
    assert_eq!(row[2].parse::<usize>().unwrap(), 4);
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.15);
    assert_eq!(row[4].parse::<f64>().unwrap(), 0.95);
    assert_eq!(row[5].parse::<f64>().unwrap(), 0.3);
    assert_eq!(row[6].parse::<f64>().unwrap(), 0.7);
    assert_eq!(row[7].parse::<f64>().unwrap(), 0.7);
    assert_eq!(row[8].parse::<u64>().unwrap(), 80);
    let pe: f64 = row[9].parse().unwrap();
    let ci_low: f64 = row[10].parse().unwrap();
    let ci_high: f64 = row[11].parse().unwrap();
    assert!(ci_low <= pe && pe <= ci_high);
    assert!(row[12].parse::<f64>().unwrap() >= 1.0);
    assert_eq!(row[13].parse::<u64>().unwrap(), 5);
    assert!(lines.next().is_none());
}

#[test]
fn simulate_is_deterministic_across_worker_counts() {
    let base = [
        "simulate", "--n", "6", "--m", "4", "--alpha", "0.3", "--trials", "300", "--schemes",
        "mp,majority,hard",
    ];
    let serial = binary().args(base).args(["--workers", "1"]).output().unwrap();
    let parallel = binary()
        .args(base)
        .env("FUSION_LAB_WORKERS", "3")
        .output()
        .unwrap();
    assert!(serial.status.success(), "{serial:?}");
    assert!(parallel.status.success(), "{parallel:?}");
    assert_eq!(serial.stdout, parallel.stdout);

    let bad_env = binary()
        .args(base)
        .env("FUSION_LAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2), "{bad_env:?}");
}

#[test]
fn simulate_writes_csv_to_file_and_keeps_stdout_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let output = run(&[
        "simulate",
        "--n",
        "5",
        "--m",
        "3",
        "--trials",
        "40",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    assert!(output.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
}

// Odd n keeps balanced report rows off the exact decision tie, where the
// two rules would break ties by coin instead of agreeing deterministically.
#[test]
fn compare_on_single_step_windows_shows_no_gap() {
    let output = run(&[
        "compare", "--n", "7", "--m", "1", "--alpha", "0.3", "--trials", "400",
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = stdout_of(&output);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,m,epsilon,rho,alpha,pmal,pmal_fc,trials,pe_mp,pe_opt,pe_gap,\
         differing_fraction,mean_iters,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[9].parse::<f64>().unwrap(), row[8].parse::<f64>().unwrap());
    assert_eq!(row[10].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[11].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn compare_rejects_windows_beyond_the_enumeration_cap() {
    let output = run(&["compare", "--n", "4", "--m", "25", "--trials", "10"]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}
