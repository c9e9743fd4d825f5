//! Text-generation backends: a uniform async contract, a scripted mock for
//! reproducible runs, and an OpenAI-compatible HTTP client.

mod http;
mod mock;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::{MockBackend, MockRule, MockScript};

use crate::prompt::ParseMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

impl TokenLogprob {
    pub fn new(token: impl Into<String>, logprob: f64) -> Self {
        Self {
            token: token.into(),
            logprob,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    /// Per-token log-probabilities, all `<= 0`, when the backend reports them.
    pub token_logprobs: Option<Vec<TokenLogprob>>,
    pub finish_reason: FinishReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 32,
            temperature: 0.0,
            stop_sequences: Vec::new(),
            seed: None,
        }
    }
}

impl DecodeParams {
    /// Greedy decoding with room for the answer surface of `mode`: 32 new
    /// tokens for label answers, 1024 when the model reasons first.
    pub fn for_mode(mode: ParseMode, seed: Option<u64>) -> Self {
        let max_new_tokens = match mode {
            ParseMode::TaggedReasoning => 1024,
            _ => 32,
        };
        Self {
            max_new_tokens,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidParams(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Failures of a backend call. Transport failures, timeouts and error
/// payloads from the backend are kept distinct.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum BackendError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("continuation must not be empty")]
    EmptyContinuation,
    #[error("invalid decode parameters: {0}")]
    InvalidParams(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("backend returned HTTP {status}: {message}")]
    Api { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend does not support continuation scoring")]
    ScoringUnsupported,
}

impl BackendError {
    /// Whether a retry could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Timeout)
    }
}

#[async_trait]
pub trait Backend: Send + Sync {
    /// Stable identifier recorded in run manifests.
    fn id(&self) -> &str;

    async fn generate(&self, prompt: &str, params: &DecodeParams) -> Result<GenerationResult, BackendError>;

    /// Teacher-forced log-probabilities of each `continuation` token given
    /// `prompt` (the two are concatenated verbatim). Token texts concatenate
    /// back to `continuation` whenever the backend can align them.
    async fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<Vec<TokenLogprob>, BackendError>;
}

/// Splits text into whitespace-led word tokens (`"Category: joy"` becomes
/// `["Category:", " joy"]`). Tokens concatenate back to the input.
pub fn word_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev_ws = true;
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if ws && !prev_ws && i > start {
            out.push(&text[start..i]);
            start = i;
        }
        prev_ws = ws;
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}
