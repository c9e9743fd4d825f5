//! Shared data model: label schemas, examples, datasets, predictions and
//! metric reports, plus the validation rules over them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// How model output is compared against schema labels.
///
/// Surrounding whitespace is always trimmed; everything else is exact unless
/// `case_fold` is set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    #[serde(default)]
    pub case_fold: bool,
}

impl MatchConfig {
    pub fn case_folding() -> Self {
        Self { case_fold: true }
    }

    pub fn matches(&self, candidate: &str, label: &str) -> bool {
        let (a, b) = (candidate.trim(), label.trim());
        if self.case_fold {
            a.to_lowercase() == b.to_lowercase()
        } else {
            a == b
        }
    }
}

/// Ordered class labels with optional definitions and an optional reserved
/// "uncertain" label.
///
/// `numeric_map` is always derived from label order and never serialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemaFile", into = "SchemaFile")]
pub struct LabelSchema {
    pub labels: Vec<String>,
    pub definitions: Option<BTreeMap<String, String>>,
    pub numeric_map: BTreeMap<String, usize>,
    pub uncertain_label: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SchemaFile {
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    definitions: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uncertain_label: Option<String>,
}

impl From<SchemaFile> for LabelSchema {
    fn from(f: SchemaFile) -> Self {
        let mut schema = LabelSchema::new(f.labels);
        schema.definitions = f.definitions;
        schema.uncertain_label = f.uncertain_label;
        schema
    }
}

impl From<LabelSchema> for SchemaFile {
    fn from(s: LabelSchema) -> Self {
        SchemaFile {
            labels: s.labels,
            definitions: s.definitions,
            uncertain_label: s.uncertain_label,
        }
    }
}

impl LabelSchema {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let numeric_map = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.trim().to_string(), i))
            .collect();
        Self {
            labels,
            definitions: None,
            numeric_map,
            uncertain_label: None,
        }
    }

    pub fn with_definitions<I, K, V>(mut self, defs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        self.definitions = Some(defs.into_iter().map(|(k, v)| (k.into(), v.into())).collect());
        self
    }

    pub fn with_uncertain_label(mut self, label: impl Into<String>) -> Self {
        self.uncertain_label = Some(label.into());
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        jsonl::read_json(path)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index of the schema label matching `candidate`.
    pub fn index_of(&self, candidate: &str, m: MatchConfig) -> Option<usize> {
        self.labels.iter().position(|l| m.matches(candidate, l))
    }

    /// The canonical (schema-spelled) label matching `candidate`.
    pub fn canonical(&self, candidate: &str, m: MatchConfig) -> Option<&str> {
        self.index_of(candidate, m).map(|i| self.labels[i].trim())
    }

    pub fn contains(&self, candidate: &str) -> bool {
        self.index_of(candidate, MatchConfig::default()).is_some()
    }

    pub fn is_uncertain(&self, candidate: &str, m: MatchConfig) -> bool {
        self.uncertain_label
            .as_deref()
            .is_some_and(|u| m.matches(candidate, u))
    }

    pub fn numeric_of(&self, label: &str) -> Option<usize> {
        self.numeric_map.get(label.trim()).copied()
    }

    pub fn label_for_numeric(&self, index: usize) -> Option<&str> {
        self.numeric_map
            .iter()
            .find(|(_, &i)| i == index)
            .map(|(l, _)| l.as_str())
    }

    pub fn definition(&self, label: &str) -> Option<&str> {
        self.definitions
            .as_ref()
            .and_then(|d| d.get(label.trim()))
            .map(String::as_str)
    }
}

/// One identified record. Pair tasks use more than one named slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub slots: BTreeMap<String, String>,
    pub gold: String,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: impl Into<String>) -> Self {
        let mut slots = BTreeMap::new();
        slots.insert("text".to_string(), text.into());
        Self {
            id: id.into(),
            slots,
            gold: gold.into(),
        }
    }

    pub fn with_slots<I, K, V>(id: impl Into<String>, slots: I, gold: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            id: id.into(),
            slots: slots.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            gold: gold.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub examples: Vec<Example>,
    pub schema_ref: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, split: Split, examples: Vec<Example>) -> Self {
        let name = name.into();
        Self {
            schema_ref: name.clone(),
            name,
            split,
            examples,
        }
    }

    /// Loads a JSON Lines dataset file; the dataset is named after the file stem.
    pub fn load(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let examples = jsonl::read_jsonl(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::new(name, split, examples))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write_jsonl(path, &self.examples)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn index(&self) -> HashMap<&str, &Example> {
        self.examples.iter().map(|e| (e.id.as_str(), e)).collect()
    }
}

/// Outcome of classifying one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub raw_output: String,
    pub format_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Prediction {
    pub fn parsed(id: impl Into<String>, raw: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            example_id: id.into(),
            raw_output: raw.into(),
            format_ok: true,
            parsed_label: Some(label.into()),
            confidence: None,
        }
    }

    pub fn format_failure(id: impl Into<String>, raw: impl Into<String>) -> Self {
        Self {
            example_id: id.into(),
            raw_output: raw.into(),
            format_ok: false,
            parsed_label: None,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: Option<f64>) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn is_correct(&self, gold: &str, m: MatchConfig) -> bool {
        self.parsed_label.as_deref().is_some_and(|p| m.matches(p, gold))
    }
}

/// The five-metric evaluation of one prediction set, with the counts it was
/// derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_total: usize,
    pub n_format_ok: usize,
    pub n_correct: usize,
    pub fmt_suc_ratio: f64,
    pub fmt_suc_acc: f64,
    pub fmt_suc_macro_f1: f64,
    pub overall_acc: f64,
    pub overall_macro_f1: f64,
    /// Set when no output parsed; fmt-suc metrics are then 0 by convention.
    #[serde(default)]
    pub empty_format_subset: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyLabel { position: usize },
    DuplicateLabel(String),
    NumericMapNotBijective,
    UncertainLabelCollision(String),
    EmptyId { position: usize },
    NoSlots(String),
    UnknownGold { id: String, gold: String },
    DuplicateId(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyLabel { position } => write!(f, "label at position {position} is empty"),
            Violation::DuplicateLabel(l) => write!(f, "duplicate label `{l}`"),
            Violation::NumericMapNotBijective => {
                write!(f, "numeric map is not a bijection onto 0..n-1 in label order")
            }
            Violation::UncertainLabelCollision(l) => {
                write!(f, "uncertain label `{l}` collides with a class label")
            }
            Violation::EmptyId { position } => write!(f, "example at position {position} has an empty id"),
            Violation::NoSlots(id) => write!(f, "example `{id}` has no text slots"),
            Violation::UnknownGold { id, gold } => {
                write!(f, "example `{id}` has gold label `{gold}` outside the schema")
            }
            Violation::DuplicateId(id) => write!(f, "duplicate example id `{id}`"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts a failing report into an error listing every violation.
    pub fn into_result(self, what: &str) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        Err(Error::Invalid(format!("{what}: {}", msgs.join("; "))))
    }
}

pub fn validate_schema(schema: &LabelSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for (i, label) in schema.labels.iter().enumerate() {
        let t = label.trim();
        if t.is_empty() {
            violations.push(Violation::EmptyLabel { position: i });
        } else if !seen.insert(t) {
            violations.push(Violation::DuplicateLabel(t.to_string()));
        }
    }

    let bijective = schema.numeric_map.len() == schema.labels.len()
        && schema
            .labels
            .iter()
            .enumerate()
            .all(|(i, l)| schema.numeric_map.get(l.trim()) == Some(&i));
    if !bijective {
        violations.push(Violation::NumericMapNotBijective);
    }

    if let Some(u) = &schema.uncertain_label {
        if seen.contains(u.trim()) {
            violations.push(Violation::UncertainLabelCollision(u.trim().to_string()));
        }
    }
    ValidationReport { violations }
}

/// Checks example invariants against `schema`. Gold labels may use the
/// schema's uncertain label (relabeled training sets).
pub fn validate_dataset(dataset: &Dataset, schema: &LabelSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let exact = MatchConfig::default();
    for (i, ex) in dataset.examples.iter().enumerate() {
        if ex.id.is_empty() {
            violations.push(Violation::EmptyId { position: i });
        } else if !seen.insert(ex.id.as_str()) {
            violations.push(Violation::DuplicateId(ex.id.clone()));
        }
        if ex.slots.is_empty() {
            violations.push(Violation::NoSlots(ex.id.clone()));
        }
        if !schema.contains(&ex.gold) && !schema.is_uncertain(&ex.gold, exact) {
            violations.push(Violation::UnknownGold {
                id: ex.id.clone(),
                gold: ex.gold.clone(),
            });
        }
    }
    ValidationReport { violations }
}
