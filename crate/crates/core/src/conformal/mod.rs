//! Split-conformal prediction: adaptive prediction sets for
//! classification, conformalized quantile regression, adaptive conformal
//! inference over a stream, and coverage accounting.

mod aci;
mod aps;
mod coverage;
mod cqr;

pub use aci::{aci_run, AciOutcome, ACI_ALPHA_MAX, ACI_ALPHA_MIN};
pub use aps::{
    aps_coverage, aps_scores, aps_set, aps_threshold, calibrate_aps, conformal_rank,
    predict_set_aps, quantile_level,
};
pub use coverage::{evaluate_coverage, CoverageRecord, CoverageReport, Truth};
pub use cqr::{calibrate_cqr, cqr_scores, predict_interval_cqr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConformalError {
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("gamma must be non-negative, got {0}")]
    InvalidGamma(f64),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("length mismatch: {0} rows vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("interval ({lo}, {hi}) at row {row} has lo > hi")]
    CrossedInterval { row: usize, lo: f64, hi: f64 },
    #[error("calibration is {found:?}, expected {expected:?}")]
    WrongKind {
        expected: ConformalKind,
        found: ConformalKind,
    },
    #[error("prediction set and truth kinds differ at row {0}")]
    KindMismatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConformalKind {
    Aps,
    Cqr,
}

/// Fitted split-conformal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalCalibration {
    pub kind: ConformalKind,
    pub alpha: f64,
    /// APS: the quantile level min(ceil((n+1)(1-alpha))/n, 1).
    /// CQR: the interval margin.
    pub q: f64,
    /// Cutoff applied at prediction time. For APS this is the calibration
    /// score at level `q`, or 1.0 when the level saturates; for CQR it
    /// equals `q`.
    pub threshold: f64,
    pub n_cal: usize,
    /// Calibration scores in ascending order.
    #[serde(skip)]
    scores: Vec<f64>,
}

impl ConformalCalibration {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Output of a conformal predictor for one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSet {
    /// Member class indices in inclusion order.
    Classes(Vec<usize>),
    Interval { lo: f64, hi: f64 },
}

impl PredictionSet {
    pub fn contains(&self, truth: &Truth) -> Option<bool> {
        match (self, truth) {
            (PredictionSet::Classes(c), Truth::Class(t)) => Some(c.contains(t)),
            (PredictionSet::Interval { lo, hi }, Truth::Value(y)) => Some(*lo <= *y && *y <= *hi),
            _ => None,
        }
    }

    /// Member count, or interval width.
    pub fn size(&self) -> f64 {
        match self {
            PredictionSet::Classes(c) => c.len() as f64,
            PredictionSet::Interval { lo, hi } => hi - lo,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), ConformalError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ConformalError::InvalidAlpha(alpha))
    }
}
