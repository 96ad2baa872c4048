//! Leaderboard assembly: dataset census, quintuples, metric unification,
//! sparse-column pruning, ranking and Markdown rendering.

mod board;
mod census;
mod markdown;
mod metrics;
mod values;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::intel::TableDigest;

pub use board::{
    assemble_board, build_quintuples, missing_count, primary_metric, prune_sparse_columns, rank_by_primary, rank_rows,
    setting_summary, Assembled, BoardRow, LeaderboardTable, MAX_MISSING_FRACTION,
};
pub use census::{census_datasets, DatasetCensus};
pub use markdown::{parse_markdown, render_markdown, MarkdownBoard, MarkdownRow};
pub use metrics::{
    arrow_direction, normalize_metric_name, unify_metrics, Conflict, Direction, KnownMetric, MetricColumn,
    MetricKnowledge, Unified, Unit,
};
pub use values::{canonical_decimal, parse_metric_value, parse_number_text, shift_decimal, MetricValue};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("nothing to assemble")]
    EmptyInput,
    #[error("{0:?} is not a column of this board")]
    UnknownMetric(String),
    #[error("metric table: {0}")]
    BadMetricTable(String),
}

/// A digest together with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigestRecord {
    pub paper_id: String,
    pub published: NaiveDate,
    pub digest: TableDigest,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Settings {
    pub model_size: String,
    pub training_strategy: String,
    pub hyperparameters: IndexMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub paper_id: String,
    pub published: NaiveDate,
    pub github: Option<String>,
}

/// What one paper contributes to one dataset's board. The title is the row's
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quintuple {
    pub title: String,
    pub dataset: String,
    /// Metric name to value; raw names before [`unify_metrics`], column
    /// names after.
    pub metrics: IndexMap<String, MetricValue>,
    pub settings: Settings,
    pub source: SourceRef,
}

impl Quintuple {
    /// A quintuple with no metrics or settings, dated 2000-01-01.
    pub fn bare(title: &str, dataset: &str) -> Quintuple {
        Quintuple {
            title: title.to_string(),
            dataset: dataset.to_string(),
            metrics: IndexMap::new(),
            settings: Settings::default(),
            source: SourceRef {
                paper_id: title.to_string(),
                published: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
                github: None,
            },
        }
    }
}
