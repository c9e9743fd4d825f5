//! Generative text classification: prompt construction, shot selection,
//! model backends, output parsing, perplexity ranking, fine-tuning corpus
//! preparation, reward scoring and evaluation.

pub mod backend;
pub mod dataset_builder;
pub mod error;
pub mod harness;
pub mod inference;
pub mod jsonl;
pub mod metrics;
pub mod prompt;
pub mod retrieval;
pub mod rewards;
pub mod selection;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dataset, Example, LabelSchema, MatchConfig, MetricsReport, Prediction, Split};
