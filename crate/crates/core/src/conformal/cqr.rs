use super::{check_alpha, conformal_rank, ConformalCalibration, ConformalError, ConformalKind, PredictionSet};

/// E_i = max(lo_i - y_i, y_i - hi_i); negative when y_i is strictly inside.
pub fn cqr_scores(predictions: &[(f64, f64)], targets: &[f64]) -> Result<Vec<f64>, ConformalError> {
    if predictions.len() != targets.len() {
        return Err(ConformalError::LengthMismatch(predictions.len(), targets.len()));
    }
    predictions
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(row, (&(lo, hi), &y))| {
            if lo > hi {
                Err(ConformalError::CrossedInterval { row, lo, hi })
            } else {
                Ok((lo - y).max(y - hi))
            }
        })
        .collect()
}

/// Margin Q = the ceil((n+1)(1-alpha))-th smallest score, clamped to the
/// largest score when that rank exceeds n.
pub fn calibrate_cqr(
    predictions: &[(f64, f64)],
    targets: &[f64],
    alpha: f64,
) -> Result<ConformalCalibration, ConformalError> {
    check_alpha(alpha)?;
    if targets.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    let mut scores = cqr_scores(predictions, targets)?;
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let margin = scores[conformal_rank(n, alpha).min(n) - 1];
    Ok(ConformalCalibration {
        kind: ConformalKind::Cqr,
        alpha,
        q: margin,
        threshold: margin,
        n_cal: n,
        scores,
    })
}

/// [lo - Q, hi + Q]; an interval that crosses after a negative margin
/// collapses to its midpoint.
pub fn predict_interval_cqr(
    (lo, hi): (f64, f64),
    calib: &ConformalCalibration,
) -> Result<PredictionSet, ConformalError> {
    if calib.kind != ConformalKind::Cqr {
        return Err(ConformalError::WrongKind {
            expected: ConformalKind::Cqr,
            found: calib.kind,
        });
    }
    let (a, b) = (lo - calib.q, hi + calib.q);
    Ok(if a > b {
        let mid = 0.5 * (a + b);
        PredictionSet::Interval { lo: mid, hi: mid }
    } else {
        PredictionSet::Interval { lo: a, hi: b }
    })
}
