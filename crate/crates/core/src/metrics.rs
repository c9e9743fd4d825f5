//! The five-metric evaluation: format success ratio, accuracy and macro-F1
//! on the format-matched subset, and accuracy and macro-F1 overall.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, LabelSchema, MatchConfig, MetricsReport, Prediction};

/// Per-label TP/FP/FN, in schema label order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub labels: Vec<String>,
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

impl ConfusionCounts {
    /// `pred[i] = None` is a failed parse: a false negative for the gold
    /// class and a false positive for nobody. Predicted labels outside
    /// `label_set` likewise only cost the gold class.
    pub fn tally<G, P>(gold: &[G], pred: &[Option<P>], label_set: &[String], m: MatchConfig) -> Result<Self>
    where
        G: AsRef<str>,
        P: AsRef<str>,
    {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: gold.len(),
                right: pred.len(),
            });
        }
        let k = label_set.len();
        let mut c = ConfusionCounts {
            labels: label_set.to_vec(),
            tp: vec![0; k],
            fp: vec![0; k],
            fn_: vec![0; k],
        };
        let find = |s: &str| label_set.iter().position(|l| m.matches(s, l));
        for (g, p) in gold.iter().zip(pred) {
            let gi = find(g.as_ref()).ok_or_else(|| Error::UnknownLabel(g.as_ref().to_string()))?;
            match p.as_ref().and_then(|p| find(p.as_ref())) {
                Some(pi) if pi == gi => c.tp[gi] += 1,
                Some(pi) => {
                    c.fp[pi] += 1;
                    c.fn_[gi] += 1;
                }
                None => c.fn_[gi] += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self, i: usize) -> f64 {
        let (tp, fp, fn_) = (self.tp[i] as f64, self.fp[i] as f64, self.fn_[i] as f64);
        let denom = 2.0 * tp + fp + fn_;
        if tp == 0.0 || denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }

    /// Unweighted mean of per-label F1 over the whole label set.
    pub fn macro_f1(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        (0..self.labels.len()).map(|i| self.f1(i)).sum::<f64>() / self.labels.len() as f64
    }
}

pub fn macro_f1<G, P>(gold: &[G], pred: &[Option<P>], label_set: &[String]) -> Result<f64>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    Ok(ConfusionCounts::tally(gold, pred, label_set, MatchConfig::default())?.macro_f1())
}

/// Scores `predictions` against the test split. Every test id must have
/// exactly one prediction and no prediction may name an unknown id.
pub fn evaluate(
    predictions: &[Prediction],
    dataset: &Dataset,
    schema: &LabelSchema,
    m: MatchConfig,
) -> Result<MetricsReport> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.example_id.as_str(), p).is_some() {
            return Err(Error::Coverage(format!("example `{}` has more than one prediction", p.example_id)));
        }
    }
    if let Some(p) = predictions.iter().find(|p| dataset.get(&p.example_id).is_none()) {
        return Err(Error::Coverage(format!("prediction for unknown example `{}`", p.example_id)));
    }

    let n = dataset.len();
    let mut gold_all = Vec::with_capacity(n);
    let mut pred_all = Vec::with_capacity(n);
    let mut gold_ok = Vec::new();
    let mut pred_ok = Vec::new();
    let mut n_correct = 0;
    for ex in &dataset.examples {
        let p = by_id
            .get(ex.id.as_str())
            .ok_or_else(|| Error::Coverage(format!("no prediction for example `{}`", ex.id)))?;
        let label = if p.format_ok { p.parsed_label.as_deref() } else { None };
        if label.is_some_and(|l| m.matches(l, &ex.gold)) {
            n_correct += 1;
        }
        if let Some(l) = label {
            gold_ok.push(ex.gold.as_str());
            pred_ok.push(Some(l));
        }
        gold_all.push(ex.gold.as_str());
        pred_all.push(label);
    }
    let n_format_ok = gold_ok.len();

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let fmt_suc_macro_f1 = if n_format_ok == 0 {
        0.0
    } else {
        ConfusionCounts::tally(&gold_ok, &pred_ok, &schema.labels, m)?.macro_f1()
    };
    let overall_macro_f1 = if n == 0 {
        0.0
    } else {
        ConfusionCounts::tally(&gold_all, &pred_all, &schema.labels, m)?.macro_f1()
    };
    let fmt_suc_ratio = ratio(n_format_ok, n);
    let fmt_suc_acc = ratio(n_correct, n_format_ok);
    Ok(MetricsReport {
        n_total: n,
        n_format_ok,
        n_correct,
        fmt_suc_ratio,
        fmt_suc_acc,
        fmt_suc_macro_f1,
        overall_acc: ratio(n_correct, n),
        overall_macro_f1,
        empty_format_subset: n_format_ok == 0,
    })
}

/// A fraction as a percentage with two decimals, rounding halves up.
pub fn percent(fraction: f64) -> String {
    // The nudge keeps values like 0.12345 (stored just below) rounding up.
    let hundredths = (fraction * 10_000.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", hundredths / 100.0)
}
