#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gencls::backend::{MockRule, MockScript};
use gencls::jsonl;
use gencls::types::{Dataset, Example, LabelSchema, Split};
use serde_json::json;

pub const EC_LABELS: [&str; 6] = ["sadness", "joy", "love", "anger", "fear", "surprise"];
const CUE: [&str; 6] = ["gloomy", "cheerful", "adoring", "furious", "scared", "astonished"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn ec_dir() -> PathBuf {
    fixtures().join("ec")
}

pub fn ec_schema() -> LabelSchema {
    LabelSchema::load(ec_dir().join("schema.json")).unwrap()
}

pub fn synthetic_train(n: usize) -> Dataset {
    let ex = (0..n)
        .map(|i| Example::new(format!("tr{i:03}"), format!("train {i} was {} all week", CUE[i % 6]), EC_LABELS[i % 6]))
        .collect();
    Dataset::new("train", Split::Train, ex)
}

pub fn synthetic_test(n: usize) -> Dataset {
    let ex = (0..n)
        .map(|i| {
            let g = (i * 7 + 3) % 6;
            Example::new(format!("te{i:03}"), format!("sample {i} feels {} today", CUE[g]), EC_LABELS[g])
        })
        .collect();
    Dataset::new("test", Split::Test, ex)
}

/// A scripted model that gets most test examples right. `skill` shifts
/// which examples it misses; a few replies are prose (format failures).
pub fn synthetic_script(test: &Dataset, skill: usize, fail_on: Option<&str>) -> MockScript {
    let mut rules = Vec::new();
    if let Some(marker) = fail_on {
        rules.push(MockRule {
            if_contains: marker.to_string(),
            reply: String::new(),
            logprobs: None,
            fail: Some("connection refused".into()),
        });
    }
    for (i, ex) in test.examples.iter().enumerate() {
        let gold = EC_LABELS.iter().position(|l| *l == ex.gold).unwrap();
        let said = if (i + skill).is_multiple_of(5) { (gold + 1) % 6 } else { gold };
        let reply = if (i + skill).is_multiple_of(7) {
            format!("It reads as {}.", EC_LABELS[said])
        } else {
            format!("Category: {}", EC_LABELS[said])
        };
        let logprobs: BTreeMap<String, Vec<f64>> = EC_LABELS
            .iter()
            .enumerate()
            .map(|(k, l)| (l.to_string(), if k == said { vec![-0.1, -0.2] } else { vec![-2.0, -1.5] }))
            .collect();
        rules.push(MockRule {
            if_contains: format!("Text: {}\n\n", ex.slots["text"]),
            reply,
            logprobs: Some(logprobs),
            fail: None,
        });
    }
    MockScript {
        rules,
        default_reply: "I am not sure.".into(),
        uniform_vocab_size: None,
    }
}

/// Writes data, scripts and a matrix config under `dir`; returns the
/// config path. `fail` names a training strategy whose backend fails on
/// numerical prompts.
pub fn write_matrix_workspace(
    dir: &Path,
    train_strategies: &[&str],
    infer_strategies: &[&str],
    fail: Option<&str>,
) -> PathBuf {
    let train = synthetic_train(30);
    let test = synthetic_test(50);
    train.save(dir.join("train.jsonl")).unwrap();
    test.save(dir.join("test.jsonl")).unwrap();
    let mut backends = serde_json::Map::new();
    for (k, t) in train_strategies.iter().enumerate() {
        let fail_on = (Some(*t) == fail).then_some("Optional categories: sadness: 0");
        let script = synthetic_script(&test, k, fail_on);
        let name = format!("mock_{t}.json");
        jsonl::write_json(dir.join(&name), &script).unwrap();
        backends.insert(t.to_string(), json!({"kind": "mock", "script": name}));
    }
    let cfg = json!({
        "train": "train.jsonl",
        "test": "test.jsonl",
        "schema": ec_dir().join("schema.json"),
        "templates": ec_dir().join("templates"),
        "train_strategies": train_strategies,
        "infer_strategies": infer_strategies,
        "backends": backends,
        "seed": 11,
        "parallelism": 4,
        "out_dir": "out",
    });
    let path = dir.join("config.json");
    jsonl::write_json(&path, &cfg).unwrap();
    path
}
