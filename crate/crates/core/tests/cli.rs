use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn swarmraft(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmraft"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn calibrate_without_noise_gives_zero_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(
        dir.path(),
        &["--f", "0", "--sigma-d", "0", "--set", "r_gnss=[0,0,0]", "--set", "r_ins=[0,0,0]", "calibrate", "--trials", "30"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("calibration.json"));
    assert_eq!(report["threshold"], 0.0);
    assert_eq!(report["samples"], 150);
}

#[test]
fn calibrate_refuses_attacked_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["--f", "1", "calibrate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration requires honest configuration"));
}

#[test]
fn simulate_fig1_scenario_flags_both_spoofers() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["--config", &config_path("fig1_6_2.toml"), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snapshot = read_json(&dir.path().join("snapshot.json"));
    let nodes = snapshot["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 6);
    assert_eq!(nodes.iter().filter(|n| n["flagged"] == true).count(), 2);
    for node in nodes {
        assert_eq!(node["flagged"], node["attacked"]);
        let gap = ["x", "y", "z"]
            .iter()
            .map(|k| (node["true"][k].as_f64().unwrap() - node["recovered"][k].as_f64().unwrap()).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(gap < 1e-6, "node {} off by {gap}", node["id"]);
    }
}

#[test]
fn honest_simulation_flags_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["--f", "0", "--seed", "5", "simulate"]);
    assert!(out.status.success());
    let report = read_json(&dir.path().join("trial.json"));
    assert_eq!(report["result"]["false_positive_flags"], 0);
    assert_eq!(report["result"]["baseline_mae"], report["result"]["recovered_mae"]);
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n = \"five\"\n").unwrap();
    let out = swarmraft(dir.path(), &["--config", bad.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&bad, "n = 5\nnot_a_key = 1\n").unwrap();
    let out = swarmraft(dir.path(), &["--config", bad.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));

    let out = swarmraft(dir.path(), &["--n", "5", "--f", "3", "simulate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_cell_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["sweep", "--ns", "7", "--fs", "2", "--trials", "5"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,f,trials,baseline_mean"));
    assert!(lines[1].starts_with("7,2,5,"));
    let jsonl = std::fs::read_to_string(dir.path().join("sweep_trials.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1 + 5);
    assert!(jsonl.starts_with("{\"config\":"));
}

#[test]
fn seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(swarmraft(&out, &["--seed", seed, "sweep", "--ns", "5", "--fs", "1", "--trials", "20"]).status.success());
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "a"), run("2", "c"));
}

#[test]
fn raft_demo_without_crashes_keeps_one_leader() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["raft-demo", "--ticks", "60"]);
    // No --crash-leader: the scripted default only applies to the library demo.
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let verdict = read_json(&dir.path().join("raft_verdict.json"));
    assert_eq!(verdict["report"]["elections"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let trace = std::fs::read_to_string(dir.path().join("raft_trace.jsonl")).unwrap();
    assert!(trace.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[test]
fn raft_demo_replaces_crashed_leader() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["raft-demo", "--crash-leader", "10:20", "--ticks", "80"]);
    assert_eq!(out.status.code(), Some(0));
    let verdict = read_json(&dir.path().join("raft_verdict.json"));
    let checks = verdict["report"]["verdict"]["reelections"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["ok"], true);
}

#[test]
fn raft_demo_majority_outage_is_not_a_safety_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(
        dir.path(),
        &["raft-demo", "--crash", "0@20:20", "--crash", "1@20:20", "--crash", "2@20:20", "--ticks", "80"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn raft_demo_rejects_tiny_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmraft(dir.path(), &["raft-demo", "--nodes", "2"]);
    assert_eq!(out.status.code(), Some(1));
}
