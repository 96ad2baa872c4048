//! Table intelligence: classification, single-round digest extraction,
//! cell entity tagging and precision/recall scoring.

mod classify;
mod datasets;
mod digest;
mod entities;
mod prf;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::latex::TableBlock;
use crate::llm::{LlmError, UsageEntry};

pub use classify::{classify_table, Shots};
pub use datasets::list_datasets;
pub use digest::{article_text, digest_paper, TableDigest, DIGEST_KEYS};
pub use entities::{is_numeric_cell, tag_table_entities};
pub use prf::{score_prf, score_prf_excluding, Prf, PrfReport};

#[derive(Debug, Error)]
pub enum IntelError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no table is classified as a main result")]
    NoMainResultTable,
    #[error("response violates the digest schema: {0}")]
    SchemaViolation(String),
    #[error("label grid is {got:?}, table is {want:?}")]
    ShapeMismatch { got: (usize, usize), want: (usize, usize) },
    #[error("predicted and gold items differ: {0}")]
    AlignmentError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A result together with the provider usage it cost, so cached results can
/// replay their usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Billed<T> {
    pub value: T,
    pub usage: Vec<UsageEntry>,
}

impl<T> Billed<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Billed<U> {
        Billed {
            value: f(self.value),
            usage: self.usage,
        }
    }
}

/// Runs `op` with a usage collector and packages whatever it recorded.
pub(crate) fn billed<T, E>(op: impl FnOnce(&mut Vec<UsageEntry>) -> Result<T, E>) -> Billed<Result<T, E>> {
    let mut usage = Vec::new();
    let value = op(&mut usage);
    Billed { value, usage }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableClass {
    MainResult,
    Ablation,
    HyperParameter,
    Other,
}

impl TableClass {
    pub const ALL: [TableClass; 4] = [
        TableClass::MainResult,
        TableClass::Ablation,
        TableClass::HyperParameter,
        TableClass::Other,
    ];

    /// The label used in the extraction schema.
    pub fn schema_label(self) -> &'static str {
        match self {
            TableClass::MainResult => "main-result/comparison",
            TableClass::Ablation => "ablation",
            TableClass::HyperParameter => "hyper-parameter",
            TableClass::Other => "others",
        }
    }

    /// Lenient label reading: schema labels, snake_case names, or a reply
    /// that mentions one of them.
    pub fn parse_label(text: &str) -> Option<TableClass> {
        let t = text
            .trim()
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '`')
            .to_lowercase();
        let exact = match t.as_str() {
            "main-result/comparison" | "main_result" | "main result" | "main-result" | "main" | "comparison" => {
                Some(TableClass::MainResult)
            }
            "ablation" | "ablation study" => Some(TableClass::Ablation),
            "hyper-parameter" | "hyper_parameter" | "hyperparameter" => Some(TableClass::HyperParameter),
            "others" | "other" => Some(TableClass::Other),
            _ => None,
        };
        if exact.is_some() {
            return exact;
        }
        if t.contains("main") || t.contains("comparison") {
            Some(TableClass::MainResult)
        } else if t.contains("ablation") {
            Some(TableClass::Ablation)
        } else if t.contains("hyper") {
            Some(TableClass::HyperParameter)
        } else if t.contains("other") {
            Some(TableClass::Other)
        } else {
            None
        }
    }

    /// Three-way view used for evaluation: hyper-parameter tables count as other.
    pub fn fold_three_way(self) -> TableClass {
        match self {
            TableClass::HyperParameter => TableClass::Other,
            c => c,
        }
    }
}

impl fmt::Display for TableClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.schema_label())
    }
}

impl Serialize for TableClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.schema_label())
    }
}

impl<'de> Deserialize<'de> for TableClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TableClass::parse_label(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown table class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityLabel {
    Method,
    Dataset,
    Metric,
    Setting,
    None,
}

impl EntityLabel {
    pub fn parse_label(text: &str) -> Option<EntityLabel> {
        match text.trim().to_lowercase().as_str() {
            "method" | "methods" | "model" => Some(EntityLabel::Method),
            "dataset" | "datasets" | "benchmark" => Some(EntityLabel::Dataset),
            "metric" | "metrics" => Some(EntityLabel::Metric),
            "setting" | "settings" | "experimental setting" => Some(EntityLabel::Setting),
            "none" | "o" | "" | "other" => Some(EntityLabel::None),
            _ => None,
        }
    }
}

/// Plain-text rendering of a table for prompts: caption, rows as
/// pipe-separated cells, then the describing prose.
pub fn render_table_for_prompt(block: &TableBlock) -> String {
    let mut out = format!("Caption: {}\nTable:\n", block.caption);
    for row in &block.grid {
        out.push_str(&row.join(" | "));
        out.push('\n');
    }
    if !block.description.is_empty() {
        out.push_str("Description: ");
        out.push_str(&block.description);
        out.push('\n');
    }
    out
}
