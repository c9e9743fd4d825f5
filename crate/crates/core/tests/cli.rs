mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gencls::jsonl;
use gencls::types::Prediction;
use serde_json::{json, Value};

fn gencls(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn edit_config(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = jsonl::read_json(path).unwrap();
    f(&mut v);
    jsonl::write_json(path, &v).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace(train: &[&str], infer: &[&str]) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_matrix_workspace(dir.path(), train, infer, None);
    (dir, cfg)
}

#[test]
fn missing_config_exits_2() {
    let o = gencls(&["matrix"], Path::new("/nonexistent/config.json"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn ppl_as_training_strategy_exits_2() {
    let (_d, cfg) = workspace(&["zero_shot"], &["zero_shot"]);
    edit_config(&cfg, |v| v["train_strategies"] = json!(["ppl"]));
    let o = gencls(&["matrix"], &cfg);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unreachable_backends_exit_4() {
    let (dir, cfg) = workspace(&["zero_shot", "definition"], &["zero_shot", "numerical"]);
    edit_config(&cfg, |v| {
        let http = json!({"kind": "http", "base_url": "http://127.0.0.1:1/v1", "model": "m",
                          "max_retries": 1, "backoff_ms": 1});
        v["backends"] = json!({"zero_shot": http, "definition": http});
    });
    let o = gencls(&["matrix", "--format", "json"], &cfg);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let report: Value = jsonl::read_json(dir.path().join("out/report.json")).unwrap();
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|c| c["error"].is_string() && c["metrics"].is_null()));
}

#[test]
fn clean_matrix_exits_0_and_is_deterministic() {
    let (dir, cfg) = workspace(&["zero_shot", "3_shot"], &["zero_shot", "fixed_3_shot", "definition_1_shot", "ppl"]);
    let out = dir.path().join("out");
    let o = gencls(&["matrix"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tsv = std::fs::read_to_string(out.join("report.tsv")).unwrap();
    let json1 = std::fs::read(out.join("report.json")).unwrap();
    assert_eq!(tsv.lines().count(), 4, "{tsv}");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("predictions/3_shot__ppl.jsonl").exists());

    // A different parallelism must not change any metric.
    let o = Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(["matrix", "--format", "json", "--parallelism", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let a: Value = serde_json::from_slice(&json1).unwrap();
    let b: Value = jsonl::read_json(out.join("report.json")).unwrap();
    for (x, y) in a["cells"].as_array().unwrap().iter().zip(b["cells"].as_array().unwrap()) {
        assert_eq!(x["metrics"], y["metrics"]);
    }
}

#[test]
fn infer_then_evaluate() {
    let (dir, cfg) = workspace(&["zero_shot"], &["zero_shot"]);
    let o = gencls(&["infer"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let preds = dir.path().join("out/predictions/zero_shot__zero_shot.jsonl");
    let p: Vec<Prediction> = jsonl::read_jsonl(&preds).unwrap();
    assert_eq!(p.len(), 50);

    let o = Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(["evaluate", "--predictions"])
        .arg(&preds)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let (ratio, acc, overall) = (
        report["fmt_suc_ratio"].as_f64().unwrap(),
        report["fmt_suc_acc"].as_f64().unwrap(),
        report["overall_acc"].as_f64().unwrap(),
    );
    assert!((overall - ratio * acc).abs() < 1e-12);
    // Scripted model: 1 in 7 replies is prose, 1 in 5 is the wrong label.
    assert!(ratio < 1.0 && acc < 1.0 && overall > 0.5);
}

#[test]
fn build_data_then_pack() {
    let (dir, cfg) = workspace(&["zero_shot", "1_shot", "uncertainty"], &["zero_shot"]);
    let o = gencls(&["build-data"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sft = dir.path().join("out/sft");
    for s in ["zero_shot", "1_shot", "uncertainty"] {
        let recs: Vec<Value> = jsonl::read_jsonl(sft.join(format!("{s}.jsonl"))).unwrap();
        assert_eq!(recs.len(), 30, "{s}");
        assert!(recs.iter().all(|r| r["token_length"].as_u64().unwrap() > 0));
    }

    let packed = dir.path().join("packs.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(["pack", "--max-len", "400", "--mode", "neat", "--input"])
        .arg(sft.join("zero_shot.jsonl"))
        .arg("--out")
        .arg(&packed)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let packs: Vec<Value> = jsonl::read_jsonl(&packed).unwrap();
    let segments: usize = packs.iter().map(|p| p["segments"].as_array().unwrap().len()).sum();
    assert_eq!(segments, 30);
    assert!(packs.iter().all(|p| p["total_length"].as_u64().unwrap() <= 400));
}

#[test]
fn build_data_from_reasoning_triples() {
    let (dir, cfg) = workspace(&["zero_shot"], &["zero_shot"]);
    let triples = dir.path().join("triples.jsonl");
    let rows: Vec<Value> = (0..4)
        .map(|i| json!({"example_id": format!("tr{i:03}"), "reason": "cue words", "class": common::EC_LABELS[i % 6]}))
        .collect();
    jsonl::write_jsonl(&triples, &rows).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(["build-data", "--order", "class-then-reason", "--triples"])
        .arg(&triples)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs: Vec<Value> = jsonl::read_jsonl(dir.path().join("out/sft/reasoning_class_then_reason.jsonl")).unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs[0]["target"].as_str().unwrap().starts_with("<answer>sadness</answer>"));
}

#[test]
fn relabel_uncertain_respects_cap() {
    let (dir, cfg) = workspace(&["zero_shot"], &["zero_shot"]);
    // Both models miss every example, so the 10% cap binds: 3 of 30.
    let wrong = |i: usize, conf: f64| {
        Prediction::parsed(format!("tr{i:03}"), "", common::EC_LABELS[(i + 1) % 6]).with_confidence(Some(conf))
    };
    let m1: Vec<Prediction> = (0..30).map(|i| wrong(i, -(i as f64) / 10.0)).collect();
    let m2: Vec<Prediction> = (0..30).map(|i| wrong(i, -1.0)).collect();
    jsonl::write_jsonl(dir.path().join("m1.jsonl"), &m1).unwrap();
    jsonl::write_jsonl(dir.path().join("m2.jsonl"), &m2).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gencls"))
        .args(["relabel-uncertain", "--preds-m1"])
        .arg(dir.path().join("m1.jsonl"))
        .arg("--preds-m2")
        .arg(dir.path().join("m2.jsonl"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = jsonl::read_json(dir.path().join("out/relabel_report.json")).unwrap();
    assert_eq!(report["n_qualified"], 30);
    assert_eq!(report["relabeled_ids"], json!(["tr027", "tr028", "tr029"]));
}
