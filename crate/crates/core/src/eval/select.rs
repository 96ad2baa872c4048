use std::cmp::Ordering;

use serde::Serialize;

use super::scores::QualityReport;
use super::EvalError;
use crate::assembly::LeaderboardTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub board: LeaderboardTable,
    pub report: QualityReport,
}

/// Candidate boards for one dataset, one per iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub iters: usize,
}

/// Index of the best candidate: highest multi-aspect score, then highest
/// coverage, then the earliest.
pub fn select_best_index(set: &CandidateSet) -> Result<usize, EvalError> {
    let mut best: Option<usize> = None;
    for (i, c) in set.candidates.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &set.candidates[b].report;
                let better = c
                    .report
                    .multiaspect
                    .cmp(&cur.multiaspect)
                    .then(c.report.coverage.cmp(&cur.coverage))
                    == Ordering::Greater;
                Some(if better { i } else { b })
            }
        };
    }
    best.ok_or(EvalError::EmptySet)
}

pub fn select_best(set: &CandidateSet) -> Result<&LeaderboardTable, EvalError> {
    select_best_index(set).map(|i| &set.candidates[i].board)
}
