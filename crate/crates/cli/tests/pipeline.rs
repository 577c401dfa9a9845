use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uniconn(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uniconn"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = uniconn(cwd, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).expect("stderr is one JSON object")
}

/// Small cohort plus a short training config in `dir`.
fn setup(dir: &Path) {
    fs::write(dir.join("synth.json"), r#"{"n_per_group": 8, "seed": 7}"#).unwrap();
    fs::write(dir.join("train.json"), r#"{"epochs": 4, "batch_size": 4}"#).unwrap();
    ok(dir, &["synth", "--config", "synth.json", "--out", "cohort"]);
}

#[test]
fn synth_train_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &[
            "estimate-prior",
            "--data",
            "cohort/manifest.json",
            "--m",
            "4",
            "--seeds-roi",
            "0,1",
            "--out",
            "prior",
        ],
    );
    assert!(dir.join("prior/prior.json").exists());
    ok(
        dir,
        &[
            "train",
            "--data",
            "cohort/manifest.json",
            "--prior",
            "prior",
            "--config",
            "train.json",
            "--folds",
            "4",
            "--out",
            "run",
        ],
    );
    for f in [
        "run.json",
        "config.json",
        "folds.json",
        "loss_log.jsonl",
        "fold_03/checkpoint/checkpoint.json",
    ] {
        assert!(dir.join("run").join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(dir.join("run/loss_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4 * 4);

    ok(
        dir,
        &[
            "evaluate",
            "--run",
            "run",
            "--data",
            "cohort/manifest.json",
            "--out",
            "metrics.json",
        ],
    );
    let m: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    let acc = m["mean_acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(m["folds"].as_array().unwrap().len(), 4);

    let record: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metrics.run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "evaluate");
    assert!(record["config_sha256"].is_string());
    assert_eq!(record["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn replay_reproduces_metrics_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &[
            "train",
            "--data",
            "cohort/manifest.json",
            "--config",
            "train.json",
            "--folds",
            "2",
            "--jobs",
            "2",
            "--out",
            "run",
        ],
    );
    ok(
        dir,
        &[
            "evaluate",
            "--run",
            "run",
            "--data",
            "cohort/manifest.json",
            "--out",
            "a/metrics.json",
        ],
    );
    ok(
        dir,
        &[
            "replay",
            "--record",
            "a/metrics.run.json",
            "--out",
            "b/metrics.json",
        ],
    );
    assert_eq!(
        fs::read(dir.join("a/metrics.json")).unwrap(),
        fs::read(dir.join("b/metrics.json")).unwrap()
    );

    // retraining from the train record gives the same checkpoints
    ok(
        dir,
        &["replay", "--record", "run/run.json", "--out", "run2"],
    );
    for f in [
        "folds.json",
        "loss_log.jsonl",
        "fold_01/checkpoint/checkpoint.json",
    ] {
        assert_eq!(
            fs::read(dir.join("run").join(f)).unwrap(),
            fs::read(dir.join("run2").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn replay_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &[
            "estimate-prior",
            "--data",
            "cohort/manifest.json",
            "--m",
            "3",
            "--out",
            "prior",
        ],
    );
    let fv = fs::read_dir(dir.join("cohort/subjects"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with("_fv.csv"))
        .unwrap();
    fs::write(&fv, fs::read_to_string(&fv).unwrap().replacen('0', "1", 1)).unwrap();
    let out = uniconn(
        dir,
        &["replay", "--record", "prior/run.json", "--out", "prior2"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.join("prior2").exists());
}

#[test]
fn missing_checkpoint_is_exit_3_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &[
            "train",
            "--data",
            "cohort/manifest.json",
            "--config",
            "train.json",
            "--folds",
            "2",
            "--out",
            "run",
        ],
    );
    fs::remove_file(dir.join("run/fold_01/checkpoint/checkpoint.json")).unwrap();
    let out = uniconn(
        dir,
        &[
            "evaluate",
            "--run",
            "run",
            "--data",
            "cohort/manifest.json",
            "--out",
            "metrics.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "missing_file");
    assert!(err["path"]
        .as_str()
        .unwrap()
        .ends_with("fold_01/checkpoint/checkpoint.json"));
    assert!(!dir.join("metrics.json").exists());
}

#[test]
fn invalid_config_is_exit_4_with_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    for (name, body) in [
        ("zero_epochs.json", r#"{"epochs": 0}"#),
        ("negative_rate.json", r#"{"lr_main": -1.0}"#),
        ("unknown_field.json", r#"{"epochz": 3}"#),
        ("malformed.json", "{"),
        ("big_batch.json", r#"{"batch_size": 64}"#),
        ("big_k.json", r#"{"k": 16}"#),
    ] {
        fs::write(dir.join(name), body).unwrap();
        let out = uniconn(
            dir,
            &[
                "train",
                "--data",
                "cohort/manifest.json",
                "--config",
                name,
                "--folds",
                "2",
                "--out",
                "run",
            ],
        );
        assert_eq!(
            out.status.code(),
            Some(4),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(error_json(&out)["error"], "invalid_config");
        assert!(!dir.join("run").exists(), "{name}");
    }
    fs::write(dir.join("bad_synth.json"), r#"{"effect_size": -1.0}"#).unwrap();
    let out = uniconn(dir, &["synth", "--config", "bad_synth.json", "--out", "c2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.join("c2").exists());
}

#[test]
fn error_kinds_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let usage = uniconn(dir, &["train", "--frobnicate"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_json(&usage)["error"], "usage");
    let missing = uniconn(
        dir,
        &[
            "estimate-prior",
            "--data",
            "nowhere/manifest.json",
            "--out",
            "p",
        ],
    );
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(error_json(&missing)["path"], "nowhere/manifest.json");
    assert!(uniconn(dir, &["--help"]).status.success());
    assert!(uniconn(dir, &["--version"]).status.success());
}

#[test]
fn analysis_commands_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    ok(
        dir,
        &[
            "train",
            "--data",
            "cohort/manifest.json",
            "--config",
            "train.json",
            "--folds",
            "2",
            "--out",
            "run",
        ],
    );
    let data = "cohort/manifest.json";
    ok(
        dir,
        &[
            "analyze", "ttest", "--run", "run", "--data", data, "--out", "tt",
        ],
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("tt/ttest.json")).unwrap()).unwrap();
    assert_eq!(report["n_patients"], 8);
    assert!(report["planted_recovery_auroc"].is_f64());
    assert!(fs::read_to_string(dir.join("tt/edges_p005.csv"))
        .unwrap()
        .starts_with("roi_i,roi_j,p,delta"));

    ok(
        dir,
        &[
            "analyze",
            "altered",
            "--run",
            "run",
            "--data",
            data,
            "--out",
            "alt",
            "--normalization",
            "per-stage",
        ],
    );
    assert!(dir.join("alt/strength.json").exists());
    let bad = uniconn(
        dir,
        &[
            "analyze",
            "altered",
            "--run",
            "run",
            "--data",
            data,
            "--out",
            "alt2",
            "--normalization",
            "max",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));

    ok(
        dir,
        &[
            "analyze",
            "importance",
            "--run",
            "run",
            "--data",
            data,
            "--out",
            "imp",
        ],
    );
    assert_eq!(
        fs::read_to_string(dir.join("imp/importance.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 16
    );

    ok(
        dir,
        &["export-uc", "--run", "run", "--data", data, "--out", "uc"],
    );
    let n = fs::read_dir(dir.join("uc"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .to_string_lossy()
                .ends_with("_uc.csv")
        })
        .count();
    assert_eq!(n, 16);
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    fs::write(dir.join("short.json"), r#"{"epochs": 2, "batch_size": 4}"#).unwrap();
    let args = [
        "sweep",
        "--data",
        "cohort/manifest.json",
        "--config",
        "short.json",
        "--param",
        "k=0,2",
        "--param",
        "lambda=1e-2..1e-3",
        "--folds",
        "2",
    ];
    let mut one = args.to_vec();
    one.extend(["--jobs", "1", "--out", "s1"]);
    let mut two = args.to_vec();
    two.extend(["--jobs", "3", "--out", "s2"]);
    ok(dir, &one);
    ok(dir, &two);
    let csv = fs::read_to_string(dir.join("s1/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with("k,lambda,mean_acc"));
    assert_eq!(csv, fs::read_to_string(dir.join("s2/sweep.csv")).unwrap());
}
