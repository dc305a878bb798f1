//! End-to-end tests of the `fracfilm` binary and its artifacts.

use std::fs;
use std::path::Path;
use std::process::Command;

use fracfilm::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracfilm"))
}

fn run_in(dir: &Path, args: &[&str]) -> std::process::Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn constant_run_has_identical_rows_and_passes_audits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "run",
            "--initial-condition",
            "constant",
            "--ic-level",
            "0.5",
            "--n-steps",
            "6",
            "--output-dir",
            "c",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("c/diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# fracfilm-v1");
    assert_eq!(lines.len(), 2 + 7);
    let strip_t = |l: &str| l.split_once(',').unwrap().1.to_string();
    assert!(lines[2..].iter().all(|l| strip_t(l) == strip_t(lines[2])));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("c/report.json")).unwrap()).unwrap();
    assert_eq!(report["audit"]["passed"], true);
    assert_eq!(report["rows"], 7);
}

#[test]
fn invalid_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["run", "--alpha", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    let out = run_in(tmp.path(), &["sweep", "--axis", "tau", "--values", "1e-3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(tmp.path(), &["verify-operator", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override_and_echo_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "# test\nalpha = 1.5\nn = 2\nepsilon = 1e-2\nT = 0.004\nn_steps = 4\nn_modes = 16\noutput_dir = from_file\n",
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &["run", "--config", "run.cfg", "--n-steps", "8", "--output-dir", "flag"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("from_file").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("flag/report.json")).unwrap()).unwrap();
    let echo: Vec<(String, String)> = report["config"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
        .collect();
    let parsed = RunConfig::from_pairs(echo).unwrap();
    assert_eq!(parsed.n_steps, 8);
    assert_eq!(parsed.alpha, 1.5);
    let expected = RunConfig::from_text(&fs::read_to_string(tmp.path().join("run.cfg")).unwrap()).unwrap();
    assert_eq!(
        parsed,
        RunConfig {
            n_steps: 8,
            output_dir: "flag".into(),
            ..expected
        }
    );
}

#[test]
fn solver_failure_exits_three_with_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "run",
            "--alpha",
            "1.5",
            "--epsilon",
            "1e-4",
            "--T",
            "50",
            "--n-steps",
            "5",
            "--newton-max-iter",
            "1",
            "--newton-tol",
            "1e-15",
            "--damping-min",
            "0.5",
            "--ic-amplitude",
            "0.5",
            "--output-dir",
            "f",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("f/diagnostics.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("# FAILED"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("f/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert_eq!(report["failure"]["step"], 1);
}

#[test]
fn verify_operator_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "verify-operator",
            "--alpha",
            "1",
            "--n-modes",
            "16",
            "--k-max",
            "2000",
            "--quad-points",
            "2000",
            "--output-dir",
            "v",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let table = fs::read_to_string(tmp.path().join("v/verify_operator.csv")).unwrap();
    assert_eq!(table, String::from_utf8(out.stdout).unwrap());
    assert_eq!(table.lines().count(), 2 + 11);
    assert!(table.lines().skip(2).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_operator_breach_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    // too coarse for the kernel tolerance at small alpha
    let out = run_in(
        tmp.path(),
        &[
            "verify-operator",
            "--alpha",
            "0.2",
            "--n-modes",
            "16",
            "--k-max",
            "4",
            "--quad-points",
            "16",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",false"));
}

#[test]
fn epsilon_sweep_writes_members_and_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sweep",
            "--axis",
            "epsilon",
            "--values",
            "1e-1,1e-2,1e-3",
            "--n-modes",
            "16",
            "--output-dir",
            "s",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..3 {
        assert!(tmp.path().join(format!("s/member_{i:02}/report.json")).exists());
    }
    let csv = fs::read_to_string(tmp.path().join("s/convergence.csv")).unwrap();
    let dists: Vec<f64> = csv
        .lines()
        .skip(3)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(dists.len(), 2);
    assert!(dists[1] < dists[0]);
}
