use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, LabelSchema, MatchConfig, Prediction};

pub const DEFAULT_CAP_FRACTION: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelabelReport {
    pub n_qualified: usize,
    pub n_relabeled: usize,
    pub relabeled_ids: Vec<String>,
    pub cap_fraction: f64,
}

/// Relabels to the schema's uncertain label every training example that
/// both reference models got wrong, keeping at most
/// `floor(cap_fraction * |train|)` of them. Over the cap, the examples with
/// the lowest mean confidence are kept, ties by ascending id.
pub fn relabel_uncertain(
    train: &Dataset,
    preds_m1: &[Prediction],
    preds_m2: &[Prediction],
    schema: &LabelSchema,
    cap_fraction: f64,
    m: MatchConfig,
) -> Result<(Dataset, RelabelReport)> {
    let uncertain = schema.uncertain_label.as_deref().ok_or(Error::NoUncertainLabel)?.trim();
    if !(0.0..=1.0).contains(&cap_fraction) {
        return Err(Error::Invalid(format!("cap fraction {cap_fraction} is outside [0, 1]")));
    }
    let by_id = |preds: &'_ [Prediction]| -> HashMap<String, Prediction> {
        preds.iter().map(|p| (p.example_id.clone(), p.clone())).collect()
    };
    let (m1, m2) = (by_id(preds_m1), by_id(preds_m2));

    let mut qualified = Vec::new();
    for ex in &train.examples {
        let p1 = m1.get(&ex.id).ok_or_else(|| Error::MissingPrediction(ex.id.clone()))?;
        let p2 = m2.get(&ex.id).ok_or_else(|| Error::MissingPrediction(ex.id.clone()))?;
        if !p1.is_correct(&ex.gold, m) && !p2.is_correct(&ex.gold, m) {
            qualified.push((ex.id.as_str(), p1, p2));
        }
    }

    let cap = (cap_fraction * train.len() as f64 + 1e-9).floor() as usize;
    let chosen: BTreeSet<&str> = if qualified.len() <= cap {
        qualified.iter().map(|q| q.0).collect()
    } else {
        let mut ranked = qualified
            .iter()
            .map(|(id, p1, p2)| match (p1.confidence, p2.confidence) {
                (Some(a), Some(b)) => Ok(((a + b) / 2.0, *id)),
                _ => Err(Error::MissingConfidence(id.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        ranked.into_iter().take(cap).map(|r| r.1).collect()
    };

    let mut out = train.clone();
    let mut relabeled_ids = Vec::with_capacity(chosen.len());
    for ex in &mut out.examples {
        if chosen.contains(ex.id.as_str()) {
            ex.gold = uncertain.to_string();
            relabeled_ids.push(ex.id.clone());
        }
    }
    Ok((
        out,
        RelabelReport {
            n_qualified: qualified.len(),
            n_relabeled: relabeled_ids.len(),
            relabeled_ids,
            cap_fraction,
        },
    ))
}
