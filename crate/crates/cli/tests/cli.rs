//! End-to-end tests of the `netdp` binary: exit codes, artifact layout,
//! config-file merging, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn netdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn graph_command_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdp(&["graph", "--spec", "hypercube:3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let parsed: serde_json::Value = serde_json::from_str(&read(dir.path(), "graph.json")).unwrap();
    assert_eq!(parsed["n"], 8);
    assert_eq!(parsed["edges"].as_array().unwrap().len(), 12);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a == "graph.json"));
    assert!(artifacts.iter().any(|a| a == "graph.txt"));
    assert!(dir.path().join("resolved_config.json").exists());
    assert!(dir.path().join("meta.json").exists());
}

#[test]
fn config_errors_exit_2() {
    // unknown graph kind
    let out = netdp(&["graph", "--spec", "moebius:3"]);
    assert_eq!(out.status.code(), Some(2));
    // missing required option
    let out = netdp(&["account", "--graph", "ring:8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // q = 0 can never connect: sampling gives up after its retry budget
    let out = netdp(&[
        "graph",
        "--spec",
        "er:6:0.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected"));
}

#[test]
fn noiseless_sync_average_reaches_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdp(&[
        "average",
        "sync",
        "--graph",
        "complete:4",
        "--sigma2",
        "0",
        "--steps",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    let final_mse = summary["mean_final_mse"].as_f64().unwrap();
    assert!(final_mse < 1e-12, "final mse {final_mse}");
}

#[test]
fn account_is_byte_reproducible() {
    let run = |dir: &Path| {
        let out = netdp(&[
            "account",
            "--graph",
            "er:24:0.3",
            "--steps",
            "6",
            "--alpha",
            "2",
            "--delta",
            "1",
            "--sigma2",
            "1",
            "--by-distance",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    for name in [
        "ledger.csv",
        "ledger.json",
        "by_distance.csv",
        "summary.json",
        "resolved_config.json",
        "manifest.json",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn config_file_merges_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[graph]\nspec = \"ring:6\"\n",
    )
    .unwrap();

    // value from the file
    let out_dir = dir.path().join("from-file");
    let out = netdp(&[
        "graph",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&read(&out_dir, "graph.json")).unwrap();
    assert_eq!(parsed["n"], 6);

    // flag wins over the file
    let out_dir = dir.path().join("from-flag");
    let out = netdp(&[
        "graph",
        "--config",
        cfg.to_str().unwrap(),
        "--spec",
        "ring:9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&read(&out_dir, "graph.json")).unwrap();
    assert_eq!(parsed["n"], 9);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[graph]\nspec = \"ring:6\"\ntypo_key = 1\n").unwrap();
    let out = netdp(&["graph", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo_key"));
}

#[test]
fn account_collusion_and_group_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdp(&[
        "account",
        "--graph",
        "complete:4",
        "--steps",
        "1",
        "--alpha",
        "2",
        "--delta",
        "1",
        "--sigma2",
        "1",
        "--collusion",
        "1,2",
        "--target",
        "0",
        "--group",
        "2,3",
        "--observer",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert!(summary["collusion"]["loss"].as_f64().unwrap() > 0.0);
    assert!(summary["group"]["loss"].as_f64().unwrap() > 0.0);
    // one observed unit per neighbor at T=1 on the complete graph
    assert_eq!(summary["msg_count"][0], 3);
}

#[test]
fn optimize_smoke_on_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdp(&[
        "optimize",
        "gd",
        "--synthetic",
        "200:4",
        "--nodes",
        "20",
        "--q",
        "auto",
        "--step",
        "0.7",
        "--sigma2",
        "2",
        "--steps",
        "5",
        "--trials",
        "2",
        "--baseline",
        "central",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert!(summary["mean_final_test_accuracy"].as_f64().unwrap() > 0.5);
    assert!(summary["central_mean_final_test_accuracy"].as_f64().unwrap() > 0.5);
    assert!(summary["ldp_epsilon"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("ledger.csv").exists());
    assert!(dir.path().join("metrics.csv").exists());
}

#[test]
fn dropout_summary_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdp(&[
        "dropout",
        "--nodes",
        "60",
        "--q",
        "0.05",
        "--rate",
        "0.3",
        "--steps",
        "120",
        "--reps",
        "2",
        "--sigma2",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert!(summary["privacy_loss_mean"].as_f64().unwrap() > 0.0);
    let csv = read(dir.path(), "summary.csv");
    assert!(csv.starts_with("rep,final_mse,mean_eps,max_eps"));
    assert_eq!(csv.lines().count(), 3);
}
