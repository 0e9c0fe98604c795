use serde::{Deserialize, Serialize};

use super::{ConformalError, PredictionSet};

/// Ground truth for one evaluated row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truth {
    Class(usize),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Exactly `n_covered / n_eval`.
    pub empirical_coverage: f64,
    /// Mean member count (classification) or mean width (regression).
    pub mean_set_size: f64,
    pub n_eval: usize,
    pub n_covered: usize,
}

impl CoverageReport {
    pub(crate) fn from_counts(n_covered: usize, n_eval: usize, total_size: f64) -> Self {
        Self {
            empirical_coverage: n_covered as f64 / n_eval as f64,
            mean_set_size: total_size / n_eval as f64,
            n_eval,
            n_covered,
        }
    }
}

/// Containment is inclusive of interval endpoints.
pub fn evaluate_coverage(
    sets: &[PredictionSet],
    truths: &[Truth],
) -> Result<CoverageReport, ConformalError> {
    if sets.len() != truths.len() {
        return Err(ConformalError::LengthMismatch(sets.len(), truths.len()));
    }
    if sets.is_empty() {
        return Err(ConformalError::EmptyEvaluation);
    }
    let mut covered = 0;
    let mut total = 0.0;
    for (row, (set, truth)) in sets.iter().zip(truths).enumerate() {
        if set.contains(truth).ok_or(ConformalError::KindMismatch(row))? {
            covered += 1;
        }
        total += set.size();
    }
    Ok(CoverageReport::from_counts(covered, sets.len(), total))
}

/// Flat record of one coverage evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub task: String,
    pub split: String,
    pub alpha: f64,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub n_eval: usize,
}

impl CoverageRecord {
    pub fn new(task: &str, split: &str, alpha: f64, report: &CoverageReport) -> Self {
        Self {
            task: task.to_string(),
            split: split.to_string(),
            alpha,
            coverage: report.empirical_coverage,
            mean_set_size: report.mean_set_size,
            n_eval: report.n_eval,
        }
    }
}
