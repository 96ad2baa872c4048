use serde::{Deserialize, Serialize};

use super::EvalError;

/// Manual construction time, in seconds per component. `t_b` and `t_f` are
/// expected already scaled by [`scale_by_retrieval`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingModelParams {
    /// Retrieval.
    pub t_r: f64,
    /// Browsing.
    pub t_b: f64,
    /// Filtering.
    pub t_f: f64,
    /// Extraction.
    pub t_e: f64,
    /// Construction.
    pub t_c: f64,
    pub items: usize,
    pub n_retrieved: usize,
    pub n_filtered: usize,
}

impl TimingModelParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, t) in [
            ("t_r", self.t_r),
            ("t_b", self.t_b),
            ("t_f", self.t_f),
            ("t_e", self.t_e),
            ("t_c", self.t_c),
        ] {
            if !t.is_finite() || t < 0.0 {
                return Err(EvalError::InvalidParams(format!("{name} = {t}")));
            }
        }
        if self.n_filtered > self.n_retrieved {
            return Err(EvalError::InvalidParams(format!(
                "{} filtered out of {} retrieved",
                self.n_filtered, self.n_retrieved
            )));
        }
        Ok(())
    }
}

/// T_manual = t_r + t_b + t_f + t_e + t_c.
pub fn estimate_manual_time(params: &TimingModelParams) -> Result<f64, EvalError> {
    params.validate()?;
    Ok(params.t_r + params.t_b + params.t_f + params.t_e + params.t_c)
}

/// Scales a per-paper time by L · n_retrieved / n_filtered: to keep L papers
/// one has to look at 1/P times as many, with P = n_filtered / n_retrieved.
pub fn scale_by_retrieval(
    per_paper: f64,
    items: usize,
    n_retrieved: usize,
    n_filtered: usize,
) -> Result<f64, EvalError> {
    if n_filtered == 0 {
        return Err(EvalError::ZeroFiltered);
    }
    Ok(per_paper * items as f64 * n_retrieved as f64 / n_filtered as f64)
}
