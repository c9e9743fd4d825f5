//! OpenAI-compatible HTTP backend: chat completions for generation, legacy
//! completions with `echo` for continuation scoring.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, DecodeParams, FinishReason, GenerationResult, TokenLogprob};
use crate::error::{Error, Result};

fn default_chat_path() -> String {
    "/chat/completions".into()
}
fn default_completions_path() -> String {
    "/completions".into()
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// e.g. `http://localhost:8000/v1`
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_chat_path")]
    pub chat_path: String,
    #[serde(default = "default_completions_path")]
    pub completions_path: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Extra attempts after a transport failure or timeout.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl HttpBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            chat_path: default_chat_path(),
            completions_path: default_completions_path(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HttpBackend {
    id: String,
    config: HttpBackendConfig,
    api_key: Option<String>,
    client: reqwest::Client,
}

impl HttpBackend {
    pub fn new(id: impl Into<String>, config: HttpBackendConfig) -> Result<Self> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Invalid(format!("environment variable `{var}` with the API key is not set"))
            })?),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Invalid(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            id: id.into(),
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!(
            "{}/{}",
            self.config.base_url.trim_end_matches('/'),
            path.trim_start_matches('/')
        )
    }

    async fn post_once(&self, url: &str, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(classify_reqwest)?;
        let status = resp.status();
        let text = resp.text().await.map_err(classify_reqwest)?;
        if !status.is_success() {
            let message = serde_json::from_str::<Value>(&text)
                .ok()
                .and_then(|v| v.pointer("/error/message").and_then(Value::as_str).map(str::to_string))
                .unwrap_or(text);
            return Err(BackendError::Api {
                status: status.as_u16(),
                message,
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Protocol(format!("invalid JSON: {e}")))
    }

    /// POSTs with retries on transient failures only.
    async fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.url(path);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body).await {
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    attempt += 1;
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
                other => return other,
            }
        }
    }

    /// Whether the scoring endpoint returns echoed log-probabilities.
    /// Transport failures are reported as errors, not as "unsupported".
    pub async fn probe_scoring(&self) -> Result<bool, BackendError> {
        match self.score_continuation("Probe:", " ok").await {
            Ok(_) => Ok(true),
            Err(BackendError::ScoringUnsupported | BackendError::Api { .. } | BackendError::Protocol(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

fn classify_reqwest(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

fn check_logprob(lp: f64) -> Result<f64, BackendError> {
    if lp.is_nan() || lp > 0.0 {
        return Err(BackendError::Protocol(format!("log-probability {lp} is not <= 0")));
    }
    Ok(lp)
}

#[async_trait]
impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, prompt: &str, params: &DecodeParams) -> Result<GenerationResult, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        params.validate()?;
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "logprobs": true,
        });
        if !params.stop_sequences.is_empty() {
            body["stop"] = json!(params.stop_sequences);
        }
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let resp = self.post(&self.config.chat_path, &body).await?;
        let choice = resp
            .pointer("/choices/0")
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Protocol("choice has no message content".into()))?
            .to_string();
        let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        let token_logprobs = match choice.pointer("/logprobs/content").and_then(Value::as_array) {
            Some(items) => Some(
                items
                    .iter()
                    .map(|it| {
                        let token = it.get("token").and_then(Value::as_str).unwrap_or_default();
                        let lp = it
                            .get("logprob")
                            .and_then(Value::as_f64)
                            .ok_or_else(|| BackendError::Protocol("token without logprob".into()))?;
                        Ok(TokenLogprob::new(token, check_logprob(lp)?))
                    })
                    .collect::<Result<Vec<_>, BackendError>>()?,
            ),
            None => None,
        };
        Ok(GenerationResult {
            text,
            token_logprobs,
            finish_reason,
        })
    }

    async fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        if continuation.is_empty() {
            return Err(BackendError::EmptyContinuation);
        }
        let full = format!("{prompt}{continuation}");
        let body = json!({
            "model": self.config.model,
            "prompt": full,
            "max_tokens": 1,
            "temperature": 0.0,
            "echo": true,
            "logprobs": 0,
        });
        let resp = self.post(&self.config.completions_path, &body).await?;
        let lp = resp.pointer("/choices/0/logprobs").filter(|v| !v.is_null());
        let Some(lp) = lp else {
            return Err(BackendError::ScoringUnsupported);
        };
        let (Some(logprobs), Some(offsets)) = (
            lp.get("token_logprobs").and_then(Value::as_array),
            lp.get("text_offset").and_then(Value::as_array),
        ) else {
            return Err(BackendError::ScoringUnsupported);
        };
        if logprobs.len() != offsets.len() {
            return Err(BackendError::Protocol("token_logprobs and text_offset differ in length".into()));
        }

        // Offsets are character positions in the echoed text. Tokens that
        // overlap the continuation are kept, clipped to it.
        let chars: Vec<char> = full.chars().collect();
        let (cont_start, cont_end) = (prompt.chars().count(), chars.len());
        let starts: Vec<usize> = offsets
            .iter()
            .map(|o| o.as_u64().map(|o| o as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| BackendError::Protocol("non-integer text_offset".into()))?;
        let mut out = Vec::new();
        for (i, &start) in starts.iter().enumerate() {
            if start >= cont_end {
                break;
            }
            let end = starts.get(i + 1).copied().unwrap_or(cont_end).min(cont_end);
            if end <= cont_start || start.max(cont_start) >= end {
                continue;
            }
            let lp = logprobs[i]
                .as_f64()
                .ok_or_else(|| BackendError::Protocol("continuation token without logprob".into()))?;
            let text: String = chars[start.max(cont_start)..end].iter().collect();
            out.push(TokenLogprob::new(text, check_logprob(lp)?));
        }
        if out.is_empty() {
            return Err(BackendError::Protocol("no continuation tokens in echoed response".into()));
        }
        Ok(out)
    }
}
