use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Tag;
use crate::prompt::Strategy;
use crate::types::{LabelSchema, MatchConfig};

use super::TrainingRecord;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonTriple {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub think: Option<String>,
    pub reason: String,
    #[serde(rename = "class")]
    pub class_label: String,
}

/// Component order of a reasoning target. The class is always the
/// `<answer>` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonOrder {
    ClassThenReason,
    ReasonThenClass,
    ThinkReasonClass,
}

impl ReasonOrder {
    pub const ALL: [ReasonOrder; 3] = [
        ReasonOrder::ClassThenReason,
        ReasonOrder::ReasonThenClass,
        ReasonOrder::ThinkReasonClass,
    ];

    pub fn layout(self) -> &'static [Tag] {
        match self {
            ReasonOrder::ClassThenReason => &[Tag::Answer, Tag::Reason],
            ReasonOrder::ReasonThenClass => &[Tag::Reason, Tag::Answer],
            ReasonOrder::ThinkReasonClass => &[Tag::Think, Tag::Reason, Tag::Answer],
        }
    }
}

/// Renders one target per triple: tag blocks in `order`, separated by a
/// space. `prompt_for` supplies the prompt for an example id.
pub fn build_reasoning_corpus(
    triples: &[ReasonTriple],
    order: ReasonOrder,
    schema: &LabelSchema,
    prompt_for: impl Fn(&str) -> Result<String>,
) -> Result<Vec<TrainingRecord>> {
    triples
        .iter()
        .map(|t| {
            let class = schema
                .canonical(&t.class_label, MatchConfig::default())
                .ok_or_else(|| Error::UnknownLabel(t.class_label.clone()))?;
            let blocks = order
                .layout()
                .iter()
                .map(|tag| {
                    let body = match tag {
                        Tag::Think => t.think.as_deref().ok_or_else(|| Error::MissingComponent {
                            id: t.example_id.clone(),
                            component: "think",
                        })?,
                        Tag::Reason => t.reason.as_str(),
                        Tag::Answer => class,
                    };
                    if body.trim().is_empty() {
                        return Err(Error::MissingComponent {
                            id: t.example_id.clone(),
                            component: tag.name(),
                        });
                    }
                    Ok(format!("{}{}{}", tag.open(), body.trim(), tag.close()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingRecord {
                example_id: t.example_id.clone(),
                strategy: Strategy::ZeroShot,
                prompt: prompt_for(&t.example_id)?,
                target: blocks.join(" "),
                token_length: None,
            })
        })
        .collect()
}
