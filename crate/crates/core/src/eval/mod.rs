//! Board quality: coverage, latest, structure and multi-aspect scores,
//! judge-driven refinement, candidate selection and reporting utilities.

mod judge;
mod pearson;
mod scores;
mod select;
mod timing;

use thiserror::Error;

use crate::llm::LlmError;

pub use judge::{
    apply_edit, apply_edits, refine_board, score_structure, Edit, Refinement, Rejection, StructureJudgment,
};
pub use pearson::pearson;
pub use scores::{score_coverage, score_latest, score_multiaspect, QualityReport, Score};
pub use select::{select_best, select_best_index, Candidate, CandidateSet};
pub use timing::{estimate_manual_time, scale_by_retrieval, TimingModelParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("total paper count is zero")]
    ZeroTotal,
    #[error("count {count} exceeds total {total}")]
    CountExceedsTotal { count: usize, total: usize },
    #[error("no reports to combine")]
    EmptyInput,
    #[error("no candidates to choose from")]
    EmptySet,
    #[error("no papers survived filtering, so retrieval cannot be scaled")]
    ZeroFiltered,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("judge gave no usable score: {0}")]
    UnparseableScore(String),
    #[error("judge reply is malformed: {0}")]
    BadReply(String),
}
