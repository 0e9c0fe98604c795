use serde::{Deserialize, Serialize};

use super::{aps_set, aps_threshold, check_alpha, ConformalCalibration, ConformalError, ConformalKind, CoverageReport};
use crate::learner::ProbabilityMatrix;

pub const ACI_ALPHA_MIN: f64 = 0.001;
pub const ACI_ALPHA_MAX: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AciOutcome {
    pub report: CoverageReport,
    /// Effective miscoverage used at each step.
    pub alpha_trace: Vec<f64>,
    /// 1 where the step's set missed the label.
    pub errors: Vec<u8>,
}

/// Adaptive conformal inference over a labelled stream.
///
/// At step t the APS cutoff is recomputed from the fixed calibration scores
/// at effective level alpha_t, the set is scored, and
/// alpha_{t+1} = clamp(alpha_t + gamma (alpha - err_t), 0.001, 0.999).
pub fn aci_run(
    probs: &ProbabilityMatrix,
    labels: &[usize],
    alpha: f64,
    gamma: f64,
    initial: &ConformalCalibration,
) -> Result<AciOutcome, ConformalError> {
    check_alpha(alpha)?;
    if !(gamma >= 0.0) {
        return Err(ConformalError::InvalidGamma(gamma));
    }
    if initial.kind != ConformalKind::Aps {
        return Err(ConformalError::WrongKind {
            expected: ConformalKind::Aps,
            found: initial.kind,
        });
    }
    if probs.n_rows() != labels.len() {
        return Err(ConformalError::LengthMismatch(probs.n_rows(), labels.len()));
    }
    if labels.is_empty() {
        return Err(ConformalError::EmptyEvaluation);
    }
    let scores = initial.scores();
    let mut alpha_t = alpha;
    let mut alpha_trace = Vec::with_capacity(labels.len());
    let mut errors = Vec::with_capacity(labels.len());
    let (mut covered, mut total_size) = (0usize, 0usize);
    for (t, &label) in labels.iter().enumerate() {
        alpha_trace.push(alpha_t);
        let threshold = if gamma == 0.0 {
            initial.threshold
        } else {
            aps_threshold(scores, alpha_t)
        };
        let set = aps_set(probs.row(t), threshold);
        total_size += set.len();
        let err = if set.contains(&label) {
            covered += 1;
            0
        } else {
            1
        };
        errors.push(err);
        alpha_t = (alpha_t + gamma * (alpha - f64::from(err))).clamp(ACI_ALPHA_MIN, ACI_ALPHA_MAX);
    }
    Ok(AciOutcome {
        report: CoverageReport::from_counts(covered, labels.len(), total_size as f64),
        alpha_trace,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{aps_coverage, calibrate_aps};

    #[test]
    fn zero_gamma_matches_static() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = 0.2 + 0.6 * ((i * 7 % 11) as f64 / 10.0);
                vec![a, 1.0 - a]
            })
            .collect();
        let p = ProbabilityMatrix::from_rows(&rows).unwrap();
        let labels: Vec<usize> = (0..50).map(|i| (i * 3 % 5 == 0) as usize).collect();
        let c = calibrate_aps(&p.select(&(0..20).collect::<Vec<_>>()), &labels[..20], 0.1).unwrap();
        let stream = p.select(&(20..50).collect::<Vec<_>>());
        let a = aci_run(&stream, &labels[20..], 0.1, 0.0, &c).unwrap();
        let s = aps_coverage(&stream, &labels[20..], c.threshold).unwrap();
        assert_eq!(a.report, s);
        assert!(a.alpha_trace.iter().all(|&x| x == 0.1));
    }

    #[test]
    fn misses_push_alpha_down_within_bounds() {
        let p = ProbabilityMatrix::from_rows(&vec![vec![0.9, 0.1]; 200]).unwrap();
        let c = calibrate_aps(&p, &vec![0; 200], 0.1).unwrap();
        let out = aci_run(&p, &vec![1; 200], 0.1, 0.5, &c).unwrap();
        assert!(out.alpha_trace.iter().all(|a| (ACI_ALPHA_MIN..=ACI_ALPHA_MAX).contains(a)));
        // a miss drives alpha to the floor, whose saturated rank covers the next row
        assert_eq!(out.alpha_trace[1], ACI_ALPHA_MIN);
        assert_eq!(out.errors[..2], [1, 0]);
        assert_eq!(out.report.empirical_coverage, 0.5);
    }

    #[test]
    fn rejects_negative_gamma() {
        let p = ProbabilityMatrix::from_rows(&[vec![1.0]]).unwrap();
        let c = calibrate_aps(&p, &[0], 0.1).unwrap();
        assert_eq!(aci_run(&p, &[0], 0.1, -0.1, &c), Err(ConformalError::InvalidGamma(-0.1)));
    }
}
