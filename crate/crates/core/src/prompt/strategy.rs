use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A prompt-construction recipe from the strategy pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    ZeroShot,
    /// Randomly sampled shots; N is 1, 3 or 5.
    NShot(u8),
    Fixed3Shot,
    Similar3Shot,
    Definition,
    Definition1Shot,
    Numerical,
    Uncertainty,
    /// Perplexity decoding. Inference only.
    Ppl,
}

/// Where a prompt's shots come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotSource {
    Random,
    Fixed,
    Retrieved,
    None,
}

/// Which parser a rendered prompt's answer must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    CategoryText,
    CategoryNumeric,
    TaggedReasoning,
    Direct,
}

impl Strategy {
    pub const ALL: [Strategy; 11] = [
        Strategy::ZeroShot,
        Strategy::NShot(1),
        Strategy::NShot(3),
        Strategy::NShot(5),
        Strategy::Fixed3Shot,
        Strategy::Similar3Shot,
        Strategy::Definition,
        Strategy::Definition1Shot,
        Strategy::Numerical,
        Strategy::Uncertainty,
        Strategy::Ppl,
    ];

    pub fn n_shot(n: u8) -> Result<Self, Error> {
        match n {
            1 | 3 | 5 => Ok(Strategy::NShot(n)),
            _ => Err(Error::Invalid(format!("n-shot supports N in {{1, 3, 5}}, got {n}"))),
        }
    }

    pub fn shot_count(self) -> usize {
        match self {
            Strategy::NShot(n) => n as usize,
            Strategy::Fixed3Shot | Strategy::Similar3Shot => 3,
            Strategy::Definition1Shot => 1,
            Strategy::ZeroShot
            | Strategy::Definition
            | Strategy::Numerical
            | Strategy::Uncertainty
            | Strategy::Ppl => 0,
        }
    }

    pub fn shot_source(self) -> ShotSource {
        match self {
            Strategy::NShot(_) | Strategy::Definition1Shot => ShotSource::Random,
            Strategy::Fixed3Shot => ShotSource::Fixed,
            Strategy::Similar3Shot => ShotSource::Retrieved,
            _ => ShotSource::None,
        }
    }

    pub fn needs_definitions(self) -> bool {
        matches!(self, Strategy::Definition | Strategy::Definition1Shot)
    }

    pub fn is_inference_only(self) -> bool {
        self == Strategy::Ppl
    }

    /// Parse mode of the plain `Category: ...` output format.
    pub fn parse_mode(self) -> ParseMode {
        if self == Strategy::Numerical {
            ParseMode::CategoryNumeric
        } else {
            ParseMode::CategoryText
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "zero_shot",
            Strategy::NShot(1) => "1_shot",
            Strategy::NShot(3) => "3_shot",
            Strategy::NShot(5) => "5_shot",
            Strategy::NShot(_) => "n_shot",
            Strategy::Fixed3Shot => "fixed_3_shot",
            Strategy::Similar3Shot => "similar_3_shot",
            Strategy::Definition => "definition",
            Strategy::Definition1Shot => "definition_1_shot",
            Strategy::Numerical => "numerical",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Ppl => "ppl",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s {
            "zero_shot" => Strategy::ZeroShot,
            "fixed_3_shot" => Strategy::Fixed3Shot,
            "similar_3_shot" => Strategy::Similar3Shot,
            "definition" => Strategy::Definition,
            "definition_1_shot" => Strategy::Definition1Shot,
            "numerical" => Strategy::Numerical,
            "uncertainty" => Strategy::Uncertainty,
            "ppl" => Strategy::Ppl,
            other => {
                let n = other
                    .strip_suffix("_shot")
                    .and_then(|n| n.parse::<u8>().ok())
                    .ok_or_else(|| Error::Invalid(format!("unknown strategy `{other}`")))?;
                Strategy::n_shot(n)?
            }
        })
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.as_str().to_string()
    }
}
