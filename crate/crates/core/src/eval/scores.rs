use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::EvalError;

/// An exact score. Serializes as the nearest `f64`, which is what a fresh
/// computation from the stored counts also produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(pub Ratio<u128>);

impl Score {
    pub fn exact(&self) -> Ratio<u128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        // correctly rounded, also when the parts exceed 2^53
        self.0.to_f64().expect("finite ratio")
    }

    pub fn from_integer(n: u128) -> Score {
        Score(Ratio::from_integer(n))
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

fn five_times(count: usize, total: usize) -> Result<Score, EvalError> {
    if total == 0 {
        return Err(EvalError::ZeroTotal);
    }
    if count > total {
        return Err(EvalError::CountExceedsTotal { count, total });
    }
    Ok(Score(Ratio::new(5 * count as u128, total as u128)))
}

/// 5 · p_used / p_total.
pub fn score_coverage(p_used: usize, p_total: usize) -> Result<Score, EvalError> {
    five_times(p_used, p_total)
}

/// 5 · p_new / p_total.
pub fn score_latest(p_new: usize, p_total: usize) -> Result<Score, EvalError> {
    five_times(p_new, p_total)
}

/// Scores for one dataset's board.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub dataset: String,
    pub coverage: Score,
    pub latest: Score,
    pub structure: u8,
    pub structure_rationale: String,
    /// The multi-aspect score of this board alone.
    pub multiaspect: Score,
    pub p_used: usize,
    pub p_total: usize,
    pub p_new: usize,
}

impl QualityReport {
    pub fn new(
        dataset: &str,
        counts: (usize, usize, usize),
        structure: u8,
        structure_rationale: String,
    ) -> Result<QualityReport, EvalError> {
        let (p_used, p_total, p_new) = counts;
        if !(1..=5).contains(&structure) {
            return Err(EvalError::InvalidParams(format!(
                "structure score {structure} is outside 1..5"
            )));
        }
        let coverage = score_coverage(p_used, p_total)?;
        let latest = score_latest(p_new, p_total)?;
        let mut report = QualityReport {
            dataset: dataset.to_string(),
            coverage,
            latest,
            structure,
            structure_rationale,
            multiaspect: Score::from_integer(0),
            p_used,
            p_total,
            p_new,
        };
        report.multiaspect = score_multiaspect(std::slice::from_ref(&report))?;
        Ok(report)
    }
}

/// Sum of coverage, latest and structure over all datasets, divided by 3N.
pub fn score_multiaspect(reports: &[QualityReport]) -> Result<Score, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let overflow = || EvalError::InvalidParams("multi-aspect sum overflows 128 bits".into());
    let mut total = Ratio::<u128>::zero();
    for r in reports {
        total = total
            .checked_add(&r.coverage.0)
            .and_then(|t| t.checked_add(&r.latest.0))
            .and_then(|t| t.checked_add(&Ratio::from_integer(r.structure as u128)))
            .ok_or_else(overflow)?;
    }
    total
        .checked_div(&Ratio::from_integer(3 * reports.len() as u128))
        .map(Score)
        .ok_or_else(overflow)
}
