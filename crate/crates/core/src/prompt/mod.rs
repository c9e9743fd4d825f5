//! Prompt rendering for every strategy in the pool, plus SFT targets.
//!
//! A rendered prompt is a sequence of blocks joined by blank lines:
//!
//! ```text
//! header
//! category list            (numeric "label: index" pairs for `numerical`)
//! format requirement       (varies with strategy, phase and output format)
//! definitions              (definition strategies only)
//! Example 1 .. Example N   (shot strategies only)
//! current case
//! closing instruction
//! ```

mod shots;
mod strategy;
mod template;

use serde::{Deserialize, Serialize};

pub use shots::{derive_seed, sample_shots, select_fixed_shots, ShotContext};
pub use strategy::{ParseMode, ShotSource, Strategy};
pub use template::{fill, PromptTemplates};

use crate::error::{Error, Result};
use crate::inference::Tag;
use crate::types::{Example, LabelSchema, MatchConfig};

/// Prefix of every category-format answer line.
pub const CATEGORY_PREFIX: &str = "Category:";

/// Whether a prompt is rendered for training-corpus construction or for
/// inference. Only the uncertainty strategy differs between the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Training,
    Inference,
}

/// Answer surface the prompt asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    /// `Category: <label>` (or `<index>` for the numerical strategy).
    Category,
    /// Tag blocks in the given order, e.g. `<reason>..</reason> <answer>..</answer>`.
    Tagged(&'static [Tag]),
    /// Bare answer, no format constraint.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub strategy: Strategy,
    pub text: String,
    pub expected_parse_mode: ParseMode,
    pub target_example_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shot_ids: Vec<String>,
}

/// Renders prompts for one dataset (schema + templates).
#[derive(Clone, Debug)]
pub struct PromptBuilder {
    pub schema: LabelSchema,
    pub templates: PromptTemplates,
}

impl PromptBuilder {
    pub fn new(schema: LabelSchema, templates: PromptTemplates) -> Self {
        Self { schema, templates }
    }

    /// Renders `example` under `strategy` in the `Category:` output format.
    pub fn render(
        &self,
        strategy: Strategy,
        example: &Example,
        context: &ShotContext,
        phase: Phase,
    ) -> Result<PromptRecord> {
        self.render_with_format(strategy, example, context, phase, OutputFormat::Category)
    }

    pub fn render_with_format(
        &self,
        strategy: Strategy,
        example: &Example,
        context: &ShotContext,
        phase: Phase,
        format: OutputFormat,
    ) -> Result<PromptRecord> {
        if context.len() != strategy.shot_count() {
            return Err(Error::ShotCountMismatch {
                strategy: strategy.to_string(),
                expected: strategy.shot_count(),
                actual: context.len(),
            });
        }
        let t = &self.templates;
        let mut blocks: Vec<String> = Vec::with_capacity(8);

        blocks.push(t.block("header")?.to_string());

        if strategy == Strategy::Numerical {
            let pairs = self
                .schema
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| format!("{}: {i}", l.trim()))
                .collect::<Vec<_>>()
                .join(", ");
            blocks.push(t.render_block("numeric_categories", &[("numeric_labels", &pairs)])?);
        } else {
            let labels = self
                .schema
                .labels
                .iter()
                .map(|l| l.trim())
                .collect::<Vec<_>>()
                .join(", ");
            blocks.push(t.render_block("categories", &[("labels", &labels)])?);
        }

        blocks.push(match format {
            OutputFormat::Tagged(layout) => {
                let layout = layout
                    .iter()
                    .map(|tag| tag.placeholder_block())
                    .collect::<Vec<_>>()
                    .join(" ");
                t.render_block("format_requirement_reasoning", &[("layout", &layout)])?
            }
            OutputFormat::Direct => t.block("format_requirement_direct")?.to_string(),
            OutputFormat::Category => match (strategy, phase) {
                (Strategy::Numerical, _) => t.block("format_requirement_numeric")?.to_string(),
                (Strategy::Uncertainty, Phase::Training) => {
                    let uncertain = self
                        .schema
                        .uncertain_label
                        .as_deref()
                        .ok_or(Error::NoUncertainLabel)?;
                    t.render_block("format_requirement_uncertain", &[("uncertain_label", uncertain)])?
                }
                _ => t.block("format_requirement")?.to_string(),
            },
        });

        if strategy.needs_definitions() {
            let mut lines = vec![t.block("definitions_header")?.to_string()];
            for label in &self.schema.labels {
                let def = self.schema.definition(label).ok_or_else(|| Error::MissingDefinitions {
                    strategy: strategy.to_string(),
                    label: label.trim().to_string(),
                })?;
                lines.push(t.render_block("definition", &[("label", label.trim()), ("definition", def)])?);
            }
            blocks.push(lines.join("\n"));
        }

        for (i, shot) in context.shots.iter().enumerate() {
            let index = (i + 1).to_string();
            let label = self.shot_label(strategy, &shot.gold)?;
            let mut vars: Vec<(&str, &str)> = shot
                .slots
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect();
            vars.push(("index", &index));
            vars.push(("label", &label));
            blocks.push(t.render_block("example", &vars)?);
        }

        let vars: Vec<(&str, &str)> = example
            .slots
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        blocks.push(t.render_block("current_case", &vars)?);
        blocks.push(t.block("instruction")?.to_string());

        let expected_parse_mode = match format {
            OutputFormat::Category => strategy.parse_mode(),
            OutputFormat::Tagged(_) => ParseMode::TaggedReasoning,
            OutputFormat::Direct => ParseMode::Direct,
        };
        Ok(PromptRecord {
            strategy,
            text: blocks.join("\n\n"),
            expected_parse_mode,
            target_example_id: example.id.clone(),
            shot_ids: context.shots.iter().map(|s| s.id.clone()).collect(),
        })
    }

    fn shot_label(&self, strategy: Strategy, gold: &str) -> Result<String> {
        let exact = MatchConfig::default();
        let label = self
            .schema
            .canonical(gold, exact)
            .ok_or_else(|| Error::UnknownLabel(gold.to_string()))?;
        Ok(if strategy == Strategy::Numerical {
            self.schema.numeric_of(label).unwrap_or_default().to_string()
        } else {
            label.to_string()
        })
    }

    /// The training target for `example`: `Category: <label>`, or
    /// `Category: <index>` for the numerical strategy.
    pub fn render_sft_target(&self, example: &Example, strategy: Strategy) -> Result<String> {
        render_sft_target(example, &self.schema, strategy)
    }
}

pub fn render_sft_target(example: &Example, schema: &LabelSchema, strategy: Strategy) -> Result<String> {
    if strategy.is_inference_only() {
        return Err(Error::InferenceOnlyStrategy(strategy.to_string()));
    }
    let exact = MatchConfig::default();
    if strategy == Strategy::Uncertainty && schema.is_uncertain(&example.gold, exact) {
        let u = schema.uncertain_label.as_deref().unwrap_or_default().trim();
        return Ok(format!("{CATEGORY_PREFIX} {u}"));
    }
    let label = schema
        .canonical(&example.gold, exact)
        .ok_or_else(|| Error::UnknownLabel(example.gold.clone()))?;
    Ok(if strategy == Strategy::Numerical {
        let idx = schema
            .numeric_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        format!("{CATEGORY_PREFIX} {idx}")
    } else {
        format!("{CATEGORY_PREFIX} {label}")
    })
}
