use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::MatrixResult;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::metrics::percent;
use crate::prompt::Strategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table" | "tsv" => Ok(ReportFormat::Table),
            other => Err(Error::Invalid(format!("unknown report format `{other}`"))),
        }
    }
}

pub const METRIC_NAMES: [&str; 5] = [
    "fmt-suc ratio",
    "fmt-suc acc",
    "fmt-suc macro-f1",
    "overall acc",
    "overall macro-f1",
];

/// Per training strategy, the inference strategy with the highest overall
/// accuracy; ties go to the earlier column. `None` if the whole row failed.
pub fn best_inference(result: &MatrixResult, train: Strategy) -> Option<Strategy> {
    let mut best: Option<(Strategy, f64)> = None;
    for &infer in &result.infer_strategies {
        let Some(m) = result.cell(train, infer).and_then(|c| c.metrics.as_ref()) else {
            continue;
        };
        if best.is_none_or(|(_, acc)| m.overall_acc > acc) {
            best = Some((infer, m.overall_acc));
        }
    }
    best.map(|b| b.0)
}

/// Tab-separated table: one row per training strategy, five metric columns
/// per inference strategy, and a final column naming the best inference
/// strategy. Values are percentages with two decimals; failed cells read
/// `ERR`.
pub fn render_table(result: &MatrixResult) -> String {
    let mut out = String::new();
    let mut h1 = vec!["method".to_string()];
    let mut h2 = vec![String::new()];
    for s in &result.infer_strategies {
        for m in METRIC_NAMES {
            h1.push(s.to_string());
            h2.push(m.to_string());
        }
    }
    h1.push("best infer".into());
    h2.push(String::new());
    writeln!(out, "{}", h1.join("\t")).unwrap();
    writeln!(out, "{}", h2.join("\t")).unwrap();

    for &train in &result.train_strategies {
        let mut row = vec![train.to_string()];
        for &infer in &result.infer_strategies {
            match result.cell(train, infer).and_then(|c| c.metrics.as_ref()) {
                Some(m) => row.extend(
                    [
                        m.fmt_suc_ratio,
                        m.fmt_suc_acc,
                        m.fmt_suc_macro_f1,
                        m.overall_acc,
                        m.overall_macro_f1,
                    ]
                    .map(percent),
                ),
                None => row.extend(std::iter::repeat_n("ERR".to_string(), 5)),
            }
        }
        row.push(best_inference(result, train).map(|s| s.to_string()).unwrap_or_default());
        writeln!(out, "{}", row.join("\t")).unwrap();
    }
    out
}

/// Writes `report.json` or `report.tsv` into `dir` and returns its path.
/// Report files hold no timestamps, so identical runs give identical bytes.
pub fn emit_report(result: &MatrixResult, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    if result.cells.is_empty() {
        return Err(Error::Invalid("nothing to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            jsonl::write_json(&path, result)?;
            Ok(path)
        }
        ReportFormat::Table => {
            let path = dir.join("report.tsv");
            std::fs::write(&path, render_table(result)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        }
    }
}

/// Run-level bookkeeping kept out of the reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub started_at: String,
    pub finished_at: String,
    pub exit_code: i32,
    pub config: super::RunConfig,
}

/// Writes `manifest.json` (timestamps and the full config) and one
/// predictions file per successful cell under `predictions/`.
pub fn emit_run_artifacts(result: &MatrixResult, record: &RunRecord, dir: &Path) -> Result<()> {
    let pred_dir = dir.join("predictions");
    std::fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
    jsonl::write_json(dir.join("manifest.json"), record)?;
    for c in result.cells.iter().filter(|c| c.error.is_none()) {
        let name = format!("{}__{}.jsonl", c.train_strategy, c.infer_strategy);
        jsonl::write_jsonl(pred_dir.join(name), &c.predictions)?;
    }
    Ok(())
}
