use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qram_repair::iterative::RepairOutcome;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qram-repair"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_repair_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let outcome = dir.path().join("outcome.json");

    let out = run(&["gen", "--n", "7", "--eps", "0.05", "--seed", "3", "--out", path_str(&tree)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&tree).unwrap();
    assert!(text.contains("\"faulty\""));

    let out = run(&["repair", "--tree", path_str(&tree), "--algo", "iterative", "--assigner", "flagmin", "--out", path_str(&outcome)]);
    if !out.status.success() {
        // Unrepairable draws are reported as errors.
        assert_eq!(out.status.code(), Some(2));
        return;
    }
    let out = run(&["verify", "--tree", path_str(&tree), "--outcome", path_str(&outcome)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["injective"], true);
}

#[test]
fn verify_rejects_corrupted_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    fs::write(&tree, r#"{"n": 4, "protected_top": true, "faulty": ["3:01", "3:11"]}"#).unwrap();
    let out = run(&["repair", "--tree", path_str(&tree), "--algo", "iterative"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut outcome: RepairOutcome = serde_json::from_slice(&out.stdout).unwrap();
    outcome.layers[0].result.assignment.clear();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&outcome).unwrap()).unwrap();
    let out = run(&["verify", "--tree", path_str(&tree), "--outcome", path_str(&bad)]);
    assert!(!out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["all_targets_accessible"], false);
}

#[test]
fn relabel_and_flagmin_output_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    fs::write(&tree, r#"{"n": 3, "protected_top": false, "faulty": ["2:1"]}"#).unwrap();
    let out = run(&["repair", "--tree", path_str(&tree), "--algo", "relabel", "--m", "2"]);
    assert!(out.status.success());
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["one_way"][0]["dir"], "left");

    fs::write(&tree, r#"{"n": 6, "protected_top": true, "faulty": ["6:00000", "6:00110", "6:10000", "6:10001", "6:10010"]}"#).unwrap();
    let out = run(&["repair", "--tree", path_str(&tree), "--algo", "flagmin"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(res["pairs"].as_array().unwrap().len(), 2);
    assert!(res["flag_count"].as_u64().unwrap() >= 1);
}

#[test]
fn stats_and_mc_outputs() {
    let out = run(&["stats", "--n", "13", "--eps", "0.01", "--format", "json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f = rows[0]["F_star"].as_f64().unwrap();
    assert!((f - 857.3).abs() < 0.1);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mc.csv");
    let out = run(&[
        "mc", "--n", "5,6", "--eps", "0.04", "--shots", "50", "--seed", "9",
        "--algos", "stats,relabel,iterative,flagmin-last-layer", "--workers", "1",
        "--out", path_str(&csv), "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("n,epsilon,shots,mean_faulty_frac"));
    assert!(header.contains("relabel_fail_m6"));
    assert!(header.contains("mean_flags_iterative"));
    assert!(header.ends_with("mean_runtime_s"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn bad_input_exits_with_error() {
    let out = run(&["gen", "--n", "40", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["stats", "--n", "2", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}
