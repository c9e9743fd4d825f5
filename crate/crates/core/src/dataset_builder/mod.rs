//! Fine-tuning corpora: strategy-rendered prompt/target pairs, uncertainty
//! relabeling, reasoning-order targets and sequence packing.

mod pack;
mod reasoning;
mod relabel;

use serde::{Deserialize, Serialize};

pub use pack::{attention_mask, pack, Pack, PackMode, Segment};
pub use reasoning::{build_reasoning_corpus, ReasonOrder, ReasonTriple};
pub use relabel::{relabel_uncertain, RelabelReport, DEFAULT_CAP_FRACTION};

use crate::error::{Error, Result};
use crate::prompt::{Phase, PromptBuilder, Strategy};
use crate::selection::ShotSelector;
use crate::types::Dataset;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub example_id: String,
    pub strategy: Strategy,
    pub prompt: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_length: Option<usize>,
}

/// Counts tokens of prompt+target for packing. Tokenization is
/// model-specific, so this is pluggable.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

/// Counts whitespace-separated words.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

impl TrainingRecord {
    pub fn with_length(mut self, counter: &dyn TokenCounter) -> Self {
        self.token_length = Some(counter.count(&self.prompt) + counter.count(&self.target));
        self
    }
}

/// One training record per example, in dataset order, rendered under
/// `strategy` with shots from `selector`.
pub fn build_sft_corpus(
    train: &Dataset,
    builder: &PromptBuilder,
    strategy: Strategy,
    selector: &ShotSelector<'_>,
) -> Result<Vec<TrainingRecord>> {
    if strategy.is_inference_only() {
        return Err(Error::InferenceOnlyStrategy(strategy.to_string()));
    }
    train
        .examples
        .iter()
        .map(|ex| {
            let ctx = selector.context(strategy, ex)?;
            let prompt = builder.render(strategy, ex, &ctx, Phase::Training)?;
            Ok(TrainingRecord {
                example_id: ex.id.clone(),
                strategy,
                prompt: prompt.text,
                target: builder.render_sft_target(ex, strategy)?,
                token_length: None,
            })
        })
        .collect()
}
