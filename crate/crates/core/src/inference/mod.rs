//! Classification by generate-and-parse or by perplexity ranking.

mod parse;

use std::ops::Range;

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

pub use parse::{
    parse_category, parse_label, parse_tagged, parse_tagged_layout, ParseOptions, ParsedLabel, Tag, TaggedBlock,
    TaggedOutput, REASON_ANSWER,
};

use crate::backend::{Backend, DecodeParams, TokenLogprob};
use crate::error::{Error, Result};
use crate::prompt::{PromptRecord, Strategy, CATEGORY_PREFIX};
use crate::types::{LabelSchema, Prediction};

/// Perplexity of one candidate label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PplScore {
    pub label: String,
    /// Negative mean token log-probability.
    pub nll_mean: f64,
    /// `exp(nll_mean)`
    pub ppl: f64,
}

/// Which tokens of the candidate continuation were averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringScope {
    /// Only tokens overlapping the label text.
    LabelTokens,
    /// Token texts could not be aligned with the continuation.
    WholeContinuation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PplOutcome {
    pub prediction: Prediction,
    /// One score per schema label, in schema order.
    pub scores: Vec<PplScore>,
    pub scope: ScoringScope,
}

/// `exp(-mean(logprobs))`
pub fn compute_ppl(logprobs: &[f64]) -> Result<f64> {
    Ok(mean_nll(logprobs)?.exp())
}

fn mean_nll(logprobs: &[f64]) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(-logprobs.iter().sum::<f64>() / logprobs.len() as f64)
}

/// Log-probabilities of the tokens overlapping `span` of `text`, or `None`
/// when the token texts do not concatenate to `text`.
pub fn span_logprobs(tokens: &[TokenLogprob], text: &str, span: Range<usize>) -> Option<Vec<f64>> {
    let mut pos = 0;
    let mut out = Vec::new();
    for t in tokens {
        let (start, end) = (pos, pos + t.token.len());
        if text.get(start..end) != Some(t.token.as_str()) {
            return None;
        }
        let overlaps = if start == end {
            start >= span.start && start <= span.end && !span.is_empty()
        } else {
            start < span.end && end > span.start
        };
        if overlaps {
            out.push(t.logprob);
        }
        pos = end;
    }
    (pos == text.len() && !out.is_empty()).then_some(out)
}

/// Generates once for `prompt` and parses the answer under its expected
/// parse mode. Backend failures are errors; unparseable output is a
/// format-failure prediction.
pub async fn classify_generate(
    backend: &dyn Backend,
    prompt: &PromptRecord,
    schema: &LabelSchema,
    params: &DecodeParams,
    opts: ParseOptions,
) -> Result<Prediction> {
    if prompt.strategy == Strategy::Ppl {
        return Err(Error::Invalid("ppl prompts are classified by classify_ppl".into()));
    }
    let out = backend.generate(&prompt.text, params).await?;
    let id = prompt.target_example_id.clone();
    Ok(match parse_label(&out.text, schema, prompt.expected_parse_mode, opts) {
        Some(parsed) => {
            let confidence = out
                .token_logprobs
                .as_deref()
                .and_then(|t| span_logprobs(t, &out.text, parsed.span.clone()))
                .map(|lps| lps.iter().sum::<f64>() / lps.len() as f64);
            Prediction::parsed(id, out.text, parsed.label).with_confidence(confidence)
        }
        None => Prediction::format_failure(id, out.text),
    })
}

/// Scores `Category: <label>` after `base_prompt` for every label and
/// predicts the lowest-perplexity one. Ties go to the earlier schema label.
pub async fn classify_ppl(
    backend: &dyn Backend,
    example_id: &str,
    base_prompt: &str,
    schema: &LabelSchema,
) -> Result<PplOutcome> {
    let prompt = format!("{base_prompt}\n");
    let mut scores = Vec::with_capacity(schema.len());
    let mut all_aligned = true;
    for label in &schema.labels {
        let label = label.trim();
        let continuation = format!("{CATEGORY_PREFIX} {label}");
        let tokens = backend.score_continuation(&prompt, &continuation).await?;
        let span = continuation.len() - label.len()..continuation.len();
        let lps = match span_logprobs(&tokens, &continuation, span) {
            Some(lps) => lps,
            None => {
                all_aligned = false;
                tokens.iter().map(|t| t.logprob).collect()
            }
        };
        let nll_mean = mean_nll(&lps)?;
        scores.push(PplScore {
            label: label.to_string(),
            nll_mean,
            ppl: nll_mean.exp(),
        });
    }
    let best = argmin_ppl(&scores).ok_or(Error::Invalid("schema has no labels".into()))?;
    let chosen = &scores[best];
    let prediction = Prediction::parsed(example_id, format!("{CATEGORY_PREFIX} {}", chosen.label), &chosen.label)
        .with_confidence(Some(-chosen.nll_mean));
    Ok(PplOutcome {
        prediction,
        scope: if all_aligned {
            ScoringScope::LabelTokens
        } else {
            ScoringScope::WholeContinuation
        },
        scores,
    })
}

/// Index of the smallest perplexity, first on ties; NaN never wins.
pub fn argmin_ppl(scores: &[PplScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            None if !s.ppl.is_nan() => best = Some(i),
            Some(b) if s.ppl < scores[b].ppl => best = Some(i),
            _ => {}
        }
    }
    best.or(if scores.is_empty() { None } else { Some(0) })
}

/// Classifies every prompt with at most `parallelism` requests in flight.
/// Output order follows input order. The first backend failure aborts the
/// batch.
pub async fn classify_all(
    backend: &dyn Backend,
    prompts: &[PromptRecord],
    schema: &LabelSchema,
    params: &DecodeParams,
    opts: ParseOptions,
    parallelism: usize,
) -> Result<Vec<Prediction>> {
    stream::iter(prompts)
        .map(|p| classify_generate(backend, p, schema, params, opts))
        .buffered(parallelism.max(1))
        .try_collect()
        .await
}

/// Perplexity classification of `(example_id, base_prompt)` pairs with
/// bounded parallelism; also reports the scoring scope used throughout.
pub async fn classify_all_ppl(
    backend: &dyn Backend,
    items: &[(String, String)],
    schema: &LabelSchema,
    parallelism: usize,
) -> Result<(Vec<Prediction>, Option<ScoringScope>)> {
    let outcomes: Vec<PplOutcome> = stream::iter(items)
        .map(|(id, prompt)| classify_ppl(backend, id, prompt, schema))
        .buffered(parallelism.max(1))
        .try_collect()
        .await?;
    let scope = outcomes
        .iter()
        .map(|o| o.scope)
        .reduce(|a, b| if a == b { a } else { ScoringScope::WholeContinuation });
    Ok((outcomes.into_iter().map(|o| o.prediction).collect(), scope))
}
