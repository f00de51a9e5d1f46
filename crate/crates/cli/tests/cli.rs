use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tabml(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabml"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = tabml(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str) {
    let cfg = r#"{
  "data": {"path": "d.csv", "target": "machine_failure"},
  "learners": [
    {"kind": "logistic_regression"},
    {"kind": "gaussian_nb"}
  ],
  "evaluate": {"k_folds": 3},
  "explain": {"method": "kernel", "background_size": 20, "sample_size": 5}
}"#;
    fs::write(dir.join(name), cfg).unwrap();
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["synth", "--shape", "failure", "--rows", "600", "--pos-rate", "0.1", "--seed", "4", "--out", "d.csv"],
    );
    write_config(dir.path(), "cfg.json");
    dir
}

#[test]
fn train_predict_evaluate_explain_report() {
    let dir = setup();
    let d = dir.path();
    let board = ok(d, &["train", "--config", "cfg.json", "--out-dir", "run"]);
    assert!(board.contains("logistic_regression"));
    assert!(board.contains("gaussian_nb"));
    for f in ["leaderboard.csv", "leaderboard.json", "roc.svg", "pr.svg", "critical_ratio.svg", "model.bin"] {
        assert!(d.join("run").join(f).exists(), "{f} missing");
    }

    ok(d, &["predict", "--artifact", "run/model.bin", "--data", "d.csv", "--out", "p.csv"]);
    let preds = fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(preds.lines().count(), 601);
    assert!(preds.starts_with("row,prediction,probability"));

    let report: serde_json::Value =
        serde_json::from_str(&ok(d, &["evaluate", "--artifact", "run/model.bin", "--data", "d.csv"])).unwrap();
    assert_eq!(report["k_folds"], 1);
    let auroc = report["mean"]["auroc"].as_f64().unwrap();
    assert!(auroc > 0.7, "auroc {auroc}");

    ok(
        d,
        &["explain", "--artifact", "run/model.bin", "--data", "d.csv", "--row", "3", "--out-dir", "ex"],
    );
    for f in ["explanation.json", "force_plot.json", "importance.json", "importance.svg"] {
        assert!(d.join("ex").join(f).exists(), "{f} missing");
    }

    let before = fs::read(d.join("run/roc.svg")).unwrap();
    fs::remove_file(d.join("run/roc.svg")).unwrap();
    ok(d, &["report", "--run-dir", "run"]);
    assert_eq!(fs::read(d.join("run/roc.svg")).unwrap(), before);
}

#[test]
fn tune_writes_one_result_per_learner() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["tune", "--config", "cfg.json", "--method", "random", "--budget", "3", "--out", "t.json"],
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[0][1]["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn profile_reports_class_balance() {
    let dir = setup();
    let v: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["profile", "d.csv", "--target", "machine_failure"])).unwrap();
    assert_eq!(v["n_rows"], 600);
    assert_eq!(v["class_counts"], serde_json::json!([540, 60]));
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    let code = |args: &[&str]| tabml(d, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["synth", "--shape", "weird", "--out", "x.csv"]), 1);
    assert_eq!(code(&["train", "--config", "missing.json"]), 2);
    assert_eq!(code(&["profile", "d.csv", "--target", "nope"]), 2);
    fs::write(
        d.join("bad.json"),
        r#"{"data": {"path": "d.csv", "target": "machine_failure"},
            "learners": [{"kind": "gaussian_nb"}], "evaluate": {"k_folds": 1}}"#,
    )
    .unwrap();
    assert_eq!(code(&["train", "--config", "bad.json"]), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_tabml"))
        .current_dir(d)
        .env("TABML_THREADS", "zero")
        .args(["profile", "d.csv"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    fs::write(d.join("junk.bin"), b"not an artifact").unwrap();
    assert_eq!(code(&["predict", "--artifact", "junk.bin", "--data", "d.csv", "--out", "p.csv"]), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = setup();
    let d = dir.path();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_tabml"))
            .current_dir(d)
            .env("TABML_THREADS", threads)
            .args(["train", "--config", "cfg.json", "--seed", "9", "--out-dir", out])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        ok(d, &["predict", "--artifact", &format!("{out}/model.bin"), "--data", "d.csv", "--out", &format!("{out}.csv")]);
        fs::read_to_string(d.join(format!("{out}.csv"))).unwrap()
    };
    assert_eq!(run("1", "a"), run("4", "b"));
}
