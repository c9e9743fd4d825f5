use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("requested {requested} examples but only {available} are available")]
    InsufficientExamples { requested: usize, available: usize },

    #[error("unknown example id `{0}`")]
    UnknownId(String),

    #[error("duplicate example id `{0}`")]
    DuplicateId(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("strategy `{strategy}` needs category definitions but the schema has none for `{label}`")]
    MissingDefinitions { strategy: String, label: String },

    #[error("strategy `{strategy}` expects {expected} shots, got {actual}")]
    ShotCountMismatch {
        strategy: String,
        expected: usize,
        actual: usize,
    },

    #[error("strategy `{0}` is only valid at inference time")]
    InferenceOnlyStrategy(String),

    #[error("missing template block `{0}`")]
    MissingTemplate(String),

    #[error("template placeholder `{{{{{0}}}}}` has no value")]
    UnboundPlaceholder(String),

    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("no embedding for example `{0}`")]
    MissingEmbedding(String),

    #[error("no prediction for example `{0}`")]
    MissingPrediction(String),

    #[error("prediction for `{0}` has no confidence, needed to rank uncertain candidates")]
    MissingConfidence(String),

    #[error("schema declares no uncertain label")]
    NoUncertainLabel,

    #[error("reasoning triple `{id}` is missing its `{component}` component")]
    MissingComponent { id: String, component: &'static str },

    #[error("record `{id}` has {length} tokens, above the pack limit of {max_len}")]
    RecordTooLong {
        id: String,
        length: usize,
        max_len: usize,
    },

    #[error("record `{0}` has no token length")]
    MissingTokenLength(String),

    #[error("predictions do not cover the dataset: {0}")]
    Coverage(String),

    #[error("length mismatch: {left} gold labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("perplexity of an empty token sequence is undefined")]
    EmptySequence,

    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
