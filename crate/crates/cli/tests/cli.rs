use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn cellbalance(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellbalance"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn cellbalance")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_CONFIG: &str = r#"{
  "gen": { "split": { "train_len": 210, "test_len": 30 }, "chunk_len": 35 },
  "train": { "epochs": 2, "hidden": 6, "batch_size": 8 }
}"#;

#[test]
fn balance_runs_from_a_hand_written_score_file() {
    let dir = tempdir().unwrap();
    let mut csv = String::from("microcell,score\n");
    for i in 0..72 {
        let hex = i / 24;
        let score = [10.0, 20.0, 30.0][hex] + (i % 24) as f64 * 0.25;
        csv.push_str(&format!("{i},{score}\n"));
    }
    fs::write(dir.path().join("scores.csv"), csv).unwrap();

    let o = cellbalance(
        &[
            "balance",
            "--layout",
            "wnl1",
            "--scores",
            "scores.csv",
            "--out",
            "bal",
            "--svg",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("bal/balance.json"));
    let before: Vec<f64> = serde_json::from_value(report["totals_before"].clone()).unwrap();
    let after: Vec<f64> = serde_json::from_value(report["totals_after"].clone()).unwrap();
    assert_eq!(before.len(), 3);
    let (sb, sa): (f64, f64) = (before.iter().sum(), after.iter().sum());
    assert!((sb - sa).abs() <= 1e-9 * sb);
    assert_eq!(report["iterations"], 3);
    assert!(dir.path().join("bal/metrics.csv").exists());
    assert!(dir.path().join("bal/before.svg").exists());
    assert!(dir.path().join("bal/after.svg").exists());
    assert!(!dir.path().join("bal/models").exists());
}

#[test]
fn balance_rejects_a_score_file_of_the_wrong_size() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("scores.csv"), "microcell,score\n0,1\n1,2\n").unwrap();
    let o = cellbalance(
        &["balance", "--layout", "wnl1", "--scores", "scores.csv", "--out", "bal"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_prints_the_reference_table() {
    let dir = tempdir().unwrap();
    let o = cellbalance(&["report", "--reference"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("32013.077"), "{out}");
    assert!(out.contains("540.240"));
    assert!(out.contains("23523.351"));
    assert!(out.contains("185.408"));
    assert!(out.contains("note:"));
}

#[test]
fn report_reads_totals_files() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("three.json"),
        r#"{"before":[1529.24,1502.008,1515.8195],"after":[1529.24,1502.008,1515.8195]}"#,
    )
    .unwrap();
    let o = cellbalance(&["report", "--input", "three.json"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("three"));
    assert!(out.contains("185.408"));
    assert!(out.contains("0.000"));
}

#[test]
fn gen_writes_rows_of_the_requested_length() {
    let dir = tempdir().unwrap();
    let o = cellbalance(&["gen", "--seed", "11", "--out", "ds", "--length", "77"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for kind in ["T", "P1", "P2", "P3"] {
        let text = fs::read_to_string(dir.path().join(format!("ds/{kind}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 78);
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 72);
        for row in rows {
            assert_eq!(row.split(',').count(), 78, "{kind}: {row}");
        }
    }
    let manifest = json(&dir.path().join("ds/manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["split"]["test_len"], 77);
}

#[test]
fn gen_and_train_require_a_seed() {
    let dir = tempdir().unwrap();
    assert_eq!(cellbalance(&["gen", "--out", "ds"], dir.path()).status.code(), Some(1));
    assert_eq!(
        cellbalance(&["train", "--dataset", "ds", "--out", "m"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(cellbalance(&["run"], dir.path()).status.code(), Some(1));
    assert_eq!(cellbalance(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempdir().unwrap();
    let o = cellbalance(
        &["train", "--seed", "1", "--dataset", "nowhere", "--out", "m"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[train]"));
}

#[test]
fn stages_compose() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL_CONFIG).unwrap();
    let p = dir.path();
    let ok = |args: &[&str]| {
        let o = cellbalance(args, p);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    ok(&["gen", "--config", "cfg.json", "--seed", "3", "--out", "ds"]);
    ok(&[
        "train",
        "--config",
        "cfg.json",
        "--seed",
        "3",
        "--dataset",
        "ds",
        "--out",
        "models",
    ]);
    for kind in ["T", "P1", "P2", "P3"] {
        assert!(p.join(format!("models/model_{kind}.json")).exists());
    }
    ok(&[
        "predict",
        "--dataset",
        "ds",
        "--models",
        "models",
        "--out",
        "fc/forecast.csv",
    ]);
    let forecast = fs::read_to_string(p.join("fc/forecast.csv")).unwrap();
    assert!(forecast.starts_with("microcell,T_hat,P1_act,P2_act,P3_act,score\n"));
    assert_eq!(forecast.lines().count(), 73);
    ok(&["balance", "--scores", "fc/forecast.csv", "--out", "bal"]);
    ok(&["report", "--input", "bal/balance.json"]);
}

#[test]
fn run_on_the_seven_cell_layout() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL_CONFIG).unwrap();
    let o = cellbalance(
        &[
            "run", "--config", "cfg.json", "--layout", "wnl2", "--seed", "9", "--out", "out",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("out/balance.json"));
    assert_eq!(report["totals_before"].as_array().unwrap().len(), 7);
    assert_eq!(report["totals_after"].as_array().unwrap().len(), 7);
    assert_eq!(report["iterations"], 7);
    let m = &report["metrics"];
    assert!(m["after"]["lvc"].as_f64().unwrap() <= m["before"]["lvc"].as_f64().unwrap());
    for f in [
        "dataset/manifest.json",
        "models/train_report.json",
        "forecast.csv",
        "metrics.csv",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn run_is_byte_identical_for_a_fixed_seed() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL_CONFIG).unwrap();
    for out in ["a", "b"] {
        let o = cellbalance(
            &["run", "--config", "cfg.json", "--seed", "4", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "balance.json",
        "models/model_T.json",
        "models/train_report.json",
        "dataset/manifest.json",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
