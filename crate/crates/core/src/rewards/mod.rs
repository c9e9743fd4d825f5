//! Rule-based rewards for reinforcement learning on classification.
//!
//! Reasoning mode asks for `<reason>..</reason> <answer>..</answer>` and pays
//! one point for the format and one for a correct answer. Direct mode has no
//! format constraint and pays for accuracy only.

mod service;

use serde::{Deserialize, Serialize};

pub use service::{router, serve, BatchRequest, BatchResponse, RewardRequest, RewardServiceConfig, ServiceState};

use crate::inference::parse_tagged;
use crate::prompt::CATEGORY_PREFIX;
use crate::types::MatchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Reasoning,
    Direct,
}

/// Field order is the wire order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_reward: u8,
    pub accuracy_reward: u8,
    pub total: u8,
}

pub fn format_reward(response: &str, mode: RewardMode) -> u8 {
    match mode {
        RewardMode::Reasoning => u8::from(parse_tagged(response).is_some()),
        RewardMode::Direct => 1,
    }
}

/// Reasoning: the tagged answer must parse and equal `gold`. Direct: the
/// trimmed response must be `gold` or `Category: gold`.
pub fn accuracy_reward(response: &str, gold: &str, mode: RewardMode, m: MatchConfig) -> u8 {
    let hit = match mode {
        RewardMode::Reasoning => parse_tagged(response)
            .and_then(|out| out.answer().map(|a| m.matches(a, gold)))
            .unwrap_or(false),
        RewardMode::Direct => {
            let t = response.trim();
            m.matches(t, gold)
                || t.strip_prefix(CATEGORY_PREFIX)
                    .is_some_and(|rest| rest.starts_with(char::is_whitespace) && m.matches(rest, gold))
        }
    };
    u8::from(hit)
}

pub fn total_reward(response: &str, gold: &str, mode: RewardMode, m: MatchConfig) -> RewardBreakdown {
    let format_reward = format_reward(response, mode);
    let accuracy_reward = accuracy_reward(response, gold, mode, m);
    let total = match mode {
        RewardMode::Reasoning => format_reward + accuracy_reward,
        RewardMode::Direct => accuracy_reward,
    };
    RewardBreakdown {
        format_reward,
        accuracy_reward,
        total,
    }
}
