use std::collections::BTreeMap;
use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{word_tokens, Backend, BackendError, DecodeParams, FinishReason, GenerationResult, TokenLogprob};
use crate::error::Result;
use crate::jsonl;

/// A scripted reply: fires when the prompt contains `if_contains`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub if_contains: String,
    pub reply: String,
    /// Scripted token log-probabilities per label (or any continuation
    /// suffix), used for scoring and for the label tokens of `reply`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<BTreeMap<String, Vec<f64>>>,
    /// When set, a matching call fails with this transport error instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    pub default_reply: String,
    /// Vocabulary size of the uniform model used to score continuations no
    /// rule covers: every token gets `-ln(size)`. Defaults to 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_vocab_size: Option<u32>,
}

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonl::read_json(path)
    }
}

/// Deterministic backend driven by a [`MockScript`]. Output depends only on
/// the prompt (and continuation, for scoring); rules are tried in order.
#[derive(Clone, Debug)]
pub struct MockBackend {
    id: String,
    script: MockScript,
}

impl MockBackend {
    pub fn new(id: impl Into<String>, script: MockScript) -> Self {
        Self { id: id.into(), script }
    }

    /// A backend that always gives the same reply.
    pub fn constant(id: impl Into<String>, reply: impl Into<String>) -> Self {
        Self::new(
            id,
            MockScript {
                rules: Vec::new(),
                default_reply: reply.into(),
                uniform_vocab_size: None,
            },
        )
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn matching_rules<'a>(&'a self, prompt: &'a str) -> impl Iterator<Item = &'a MockRule> + 'a {
        self.script.rules.iter().filter(move |r| prompt.contains(&r.if_contains))
    }

    /// Scripted tokens for `text` if some key of `rule.logprobs` is a suffix
    /// of it: the remaining prefix becomes one token with logprob 0 and the
    /// key is split into one token per scripted value.
    fn scripted_tokens(rule: &MockRule, text: &str) -> Option<Vec<TokenLogprob>> {
        let table = rule.logprobs.as_ref()?;
        let (key, lps) = table
            .iter()
            .filter(|(k, _)| !k.is_empty() && text.ends_with(k.as_str()))
            .max_by_key(|(k, _)| k.len())?;
        let prefix = &text[..text.len() - key.len()];
        let mut tokens = Vec::with_capacity(lps.len() + 1);
        if !prefix.is_empty() {
            tokens.push(TokenLogprob::new(prefix, 0.0));
        }
        let chars: Vec<char> = key.chars().collect();
        let n = lps.len();
        for (i, lp) in lps.iter().enumerate() {
            let (a, b) = (i * chars.len() / n, (i + 1) * chars.len() / n);
            tokens.push(TokenLogprob::new(chars[a..b].iter().collect::<String>(), *lp));
        }
        Some(tokens)
    }

    fn uniform_logprob(&self) -> f64 {
        let v = self.script.uniform_vocab_size.unwrap_or(2).max(1);
        -(f64::from(v)).ln()
    }
}

#[async_trait]
impl Backend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, prompt: &str, params: &DecodeParams) -> Result<GenerationResult, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        params.validate()?;
        let rule = self.matching_rules(prompt).next();
        if let Some(msg) = rule.and_then(|r| r.fail.as_ref()) {
            return Err(BackendError::Transport(msg.clone()));
        }
        let mut text = rule.map_or(self.script.default_reply.as_str(), |r| r.reply.as_str());
        let mut finish_reason = FinishReason::Stop;

        if let Some(cut) = params.stop_sequences.iter().filter_map(|s| text.find(s.as_str())).min() {
            text = &text[..cut];
        }
        let words = word_tokens(text);
        if words.len() > params.max_new_tokens as usize {
            let keep: usize = words[..params.max_new_tokens as usize].iter().map(|w| w.len()).sum();
            text = &text[..keep];
            finish_reason = FinishReason::Length;
        }

        let token_logprobs = rule.and_then(|r| Self::scripted_tokens(r, text.trim_end()));
        Ok(GenerationResult {
            text: text.to_string(),
            token_logprobs,
            finish_reason,
        })
    }

    async fn score_continuation(&self, prompt: &str, continuation: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        if continuation.is_empty() {
            return Err(BackendError::EmptyContinuation);
        }
        if let Some(msg) = self.matching_rules(prompt).find_map(|r| r.fail.as_ref()) {
            return Err(BackendError::Transport(msg.clone()));
        }
        if let Some(tokens) = self
            .matching_rules(prompt)
            .find_map(|r| Self::scripted_tokens(r, continuation))
        {
            return Ok(tokens);
        }
        let lp = self.uniform_logprob();
        Ok(word_tokens(continuation)
            .into_iter()
            .map(|t| TokenLogprob::new(t, lp))
            .collect())
    }
}
