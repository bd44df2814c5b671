mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowcast::bundle::ModelBundle;
use flowcast::cli::{cmd_train, PREDICTIONS_HEADER};
use flowcast::encoding::EncodedSequence;
use flowcast::eventlog::{write_log, EventLog};
use flowcast::harness::{ExperimentConfig, RESULTS_HEADER};
use flowcast::neuralnet::predict_batch;
use tempfile::TempDir;

use common::{event, signal_log};

fn flowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcast"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv_log(dir: &Path, name: &str, log: &EventLog) -> PathBuf {
    let path = dir.join(name);
    write_log(log, fs::File::create(&path).unwrap()).unwrap();
    path
}

fn setup(extra: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    write_csv_log(dir.path(), "signal.csv", &signal_log(45, 3));
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "dataset": "signal.csv",
  "features": ["None", "Clust4"],
  "iterations": 3,
  "total_epochs": 1,
  "batch_size": 32,
  "hidden_dim": 6,
  "seed": 17{extra}
}}"#
        ),
    )
    .unwrap();
    (dir, config)
}

#[test]
fn run_writes_results_and_is_reproducible() {
    let (dir, config) = setup(r#", "record_timings": false"#);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let iters = dir.path().join("iters.csv");
    let run = flowcast(&["run", s(&config), "--out", s(&out_a), "--iter-log", s(&iters)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(&out_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], RESULTS_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 3 + 2 * 2);
    assert!(lines.iter().any(|l| l.starts_with("signal,Clust4,stdev,")));
    let iter_lines = fs::read_to_string(&iters).unwrap();
    assert_eq!(iter_lines.lines().next(), Some("fold,mode,iteration,validation_accuracy"));
    assert_eq!(iter_lines.lines().count(), 1 + 6 * 3);

    assert!(flowcast(&["run", s(&config), "--out", s(&out_b)]).status.success());
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());

    let out_c = dir.path().join("c.csv");
    assert!(flowcast(&["run", s(&config), "--out", s(&out_c), "--seed", "99"]).status.success());
    assert_eq!(fs::read_to_string(&out_c).unwrap().lines().count(), lines.len());
}

#[test]
fn invalid_configs_exit_with_2() {
    let (dir, _) = setup("");
    let zero = dir.path().join("zero.json");
    fs::write(&zero, r#"{"dataset": "signal.csv", "folds": 0}"#).unwrap();
    let out = flowcast(&["run", s(&zero), "--out", s(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("folds"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"dataset\": \"signal.csv\",\n  \"folds\": }").unwrap();
    let out = flowcast(&["run", s(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"dataset": "signal.csv", "epochs": 3}"#).unwrap();
    assert_eq!(flowcast(&["run", s(&unknown)]).status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"dataset": "nowhere.csv"}"#).unwrap();
    let out = flowcast(&["run", s(&config), "--out", s(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = flowcast(&["train", s(&config), "--out", s(&dir.path().join("m.bin"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_then_predict() {
    let (dir, config) = setup("");
    let model = dir.path().join("model.bin");
    let out = flowcast(&["train", s(&config), "--out", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = ModelBundle::load(&model).unwrap();
    assert_eq!(bundle.encoder().unwrap().width(), bundle.network.dims().input);
    assert_eq!(bundle.mode.to_string(), "None");
    let cfg = ExperimentConfig::load(&config).unwrap();
    assert!(bundle.matches_config(&cfg));
    let mut drifted = cfg.clone();
    drifted.hidden_dim += 1;
    assert!(!bundle.matches_config(&drifted));

    // An unseen activity and an unseen attribute value are encoded as zeros.
    let log = EventLog::from_events(vec![
        event("x1", "A", 0, &[("x", "v0")]),
        event("x1", "Z", 1, &[("x", "v9")]),
        event("x1", "A", 2, &[("x", "v1")]),
        event("x2", "C", 0, &[]),
    ]);
    let log_path = write_csv_log(dir.path(), "new.csv", &log);
    let preds = dir.path().join("preds.csv");
    let out = flowcast(&["predict", s(&model), s(&log_path), "--out", s(&preds)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], PREDICTIONS_HEADER);
    assert_eq!(lines.len(), 1 + 4);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let p: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(["A", "B", "C", "FINISHED"].contains(&fields[2]), "{line}");
    }
    assert!(lines[2].starts_with("x1,2,"));

    let stdout = flowcast(&["predict", s(&model), s(&log_path)]);
    assert!(stdout.status.success());
    assert_eq!(String::from_utf8_lossy(&stdout.stdout), text);
}

#[test]
fn empty_log_predicts_header_only() {
    let (dir, config) = setup("");
    let model = dir.path().join("model.bin");
    assert!(flowcast(&["train", s(&config), "--out", s(&model)]).status.success());
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "caseid,activity,time\n").unwrap();
    let out = flowcast(&["predict", s(&model), s(&empty)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), format!("{PREDICTIONS_HEADER}\n"));
}

#[test]
fn corrupted_model_is_rejected() {
    let (dir, config) = setup("");
    let model = dir.path().join("model.bin");
    assert!(flowcast(&["train", s(&config), "--out", s(&model)]).status.success());
    let mut bytes = fs::read(&model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&model, &bytes).unwrap();
    let log = write_csv_log(dir.path(), "one.csv", &EventLog::from_events(vec![event("c", "A", 0, &[])]));
    let out = flowcast(&["predict", s(&model), s(&log)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn loaded_bundle_predicts_bitwise_identically() {
    let (dir, config) = setup("");
    let cfg_text = fs::read_to_string(&config)
        .unwrap()
        .replace("[\"None\", \"Clust4\"]", "[\"Both4\"]");
    fs::write(&config, cfg_text).unwrap();
    let model = dir.path().join("model.bin");
    let trained = cmd_train(&config, &model).unwrap();
    let loaded = ModelBundle::load(&model).unwrap();
    assert_eq!(loaded, trained);
    let log = signal_log(10, 77);
    let encoder = loaded.encoder().unwrap();
    let seqs: Vec<EncodedSequence> = log
        .cases
        .iter()
        .map(|c| encoder.encode_prefix(&c.events, &flowcast::encoding::NextActivity::Finished))
        .collect();
    let refs: Vec<&EncodedSequence> = seqs.iter().collect();
    let a = predict_batch(&trained.network, &refs).unwrap();
    let b = predict_batch(&loaded.network, &refs).unwrap();
    for ((ca, pa), (cb, pb)) in a.iter().zip(&b) {
        assert_eq!(ca, cb);
        assert!(pa.iter().zip(pb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
