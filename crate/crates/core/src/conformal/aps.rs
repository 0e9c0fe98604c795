use super::{check_alpha, ConformalCalibration, ConformalError, ConformalKind, CoverageReport};
use crate::learner::ProbabilityMatrix;

/// Slack on cumulative-probability comparisons.
const CUMULATIVE_TOLERANCE: f64 = 1e-12;

/// ceil((n+1)(1-alpha)), the 1-based rank of the conformal quantile.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let raw = (n as f64 + 1.0) * (1.0 - alpha);
    // Guard against representation error such as 20 * 0.9 = 18.000000000000004.
    (raw - 1e-9).ceil().max(1.0) as usize
}

/// min(ceil((n+1)(1-alpha)) / n, 1).
pub fn quantile_level(n: usize, alpha: f64) -> f64 {
    (conformal_rank(n, alpha) as f64 / n as f64).min(1.0)
}

/// Cutoff for sorted calibration scores: the rank-th smallest score, or 1.0
/// (the full label set) when the rank exceeds the calibration size.
pub fn aps_threshold(sorted_scores: &[f64], alpha: f64) -> f64 {
    let r = conformal_rank(sorted_scores.len(), alpha);
    if r > sorted_scores.len() {
        1.0
    } else {
        sorted_scores[r - 1]
    }
}

/// Classes by descending probability, ties by ascending index.
fn ranked(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

/// Cumulative mass of the classes ranked at or above each true label.
pub fn aps_scores(probs: &ProbabilityMatrix, labels: &[usize]) -> Result<Vec<f64>, ConformalError> {
    if probs.n_rows() != labels.len() {
        return Err(ConformalError::LengthMismatch(probs.n_rows(), labels.len()));
    }
    let k = probs.n_classes();
    labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            if label >= k {
                return Err(ConformalError::LabelOutOfRange { label, n_classes: k });
            }
            let row = probs.row(i);
            let mut cum = 0.0;
            for c in ranked(row) {
                cum += row[c];
                if c == label {
                    break;
                }
            }
            Ok(cum.min(1.0))
        })
        .collect()
}

pub fn calibrate_aps(
    probs: &ProbabilityMatrix,
    labels: &[usize],
    alpha: f64,
) -> Result<ConformalCalibration, ConformalError> {
    check_alpha(alpha)?;
    if labels.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    let mut scores = aps_scores(probs, labels)?;
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    Ok(ConformalCalibration {
        kind: ConformalKind::Aps,
        alpha,
        q: quantile_level(n, alpha),
        threshold: aps_threshold(&scores, alpha),
        n_cal: n,
        scores,
    })
}

/// Greedy APS set: classes in descending-probability order until the
/// cumulative mass reaches `threshold`, the crossing class included. A
/// threshold of 1 or more yields every class.
pub fn aps_set(row: &[f64], threshold: f64) -> Vec<usize> {
    let order = ranked(row);
    if threshold >= 1.0 {
        return order;
    }
    let mut cum = 0.0;
    for (taken, &c) in order.iter().enumerate() {
        cum += row[c];
        if cum >= threshold - CUMULATIVE_TOLERANCE {
            return order[..=taken].to_vec();
        }
    }
    order
}

pub fn predict_set_aps(
    row: &[f64],
    calib: &ConformalCalibration,
) -> Result<Vec<usize>, ConformalError> {
    if calib.kind != ConformalKind::Aps {
        return Err(ConformalError::WrongKind {
            expected: ConformalKind::Aps,
            found: calib.kind,
        });
    }
    Ok(aps_set(row, calib.threshold))
}

/// Coverage and mean set size of APS sets at `threshold` over labelled rows.
pub fn aps_coverage(
    probs: &ProbabilityMatrix,
    labels: &[usize],
    threshold: f64,
) -> Result<CoverageReport, ConformalError> {
    if probs.n_rows() != labels.len() {
        return Err(ConformalError::LengthMismatch(probs.n_rows(), labels.len()));
    }
    if labels.is_empty() {
        return Err(ConformalError::EmptyEvaluation);
    }
    let mut covered = 0;
    let mut total_size = 0;
    for (i, &label) in labels.iter().enumerate() {
        let set = aps_set(probs.row(i), threshold);
        total_size += set.len();
        if set.contains(&label) {
            covered += 1;
        }
    }
    Ok(CoverageReport::from_counts(covered, labels.len(), total_size as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, k: usize) -> ProbabilityMatrix {
        ProbabilityMatrix::new(k, vec![1.0 / k as f64; n * k]).unwrap()
    }

    #[test]
    fn quantile_level_arithmetic() {
        assert_eq!(quantile_level(9, 0.1), 1.0);
        assert_eq!(quantile_level(19, 0.1), 18.0 / 19.0);
        assert_eq!(quantile_level(100, 0.99), 0.02);
    }

    #[test]
    fn hand_computed_sets() {
        assert_eq!(aps_set(&[0.7, 0.2, 0.1], 0.85), vec![0, 1]);
        assert_eq!(aps_set(&[0.25; 4], 0.5).len(), 2);
        assert_eq!(aps_set(&[0.25; 4], 0.5), vec![0, 1]);
        assert_eq!(aps_set(&[0.6, 0.4, 0.0], 1.0), vec![0, 1, 2]);
        assert_eq!(aps_set(&[0.1, 0.9], 0.0), vec![1]);
    }

    #[test]
    fn scores_include_own_mass() {
        let p = ProbabilityMatrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.7, 0.2, 0.1]]).unwrap();
        let s = aps_scores(&p, &[0, 2]).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-12);
        assert!((s[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_rank_yields_full_sets() {
        let c = calibrate_aps(&uniform(9, 3), &[0; 9], 0.1).unwrap();
        assert_eq!(c.q, 1.0);
        // rank 9 of 9: the largest score, not saturation
        assert!((c.threshold - 1.0 / 3.0).abs() < 1e-12);
        let c = calibrate_aps(&uniform(8, 3), &[0; 8], 0.1).unwrap();
        assert_eq!(c.threshold, 1.0);
        assert_eq!(predict_set_aps(&[0.5, 0.3, 0.2], &c).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn high_alpha_gives_near_singletons() {
        let c = calibrate_aps(&uniform(100, 4), &[0; 100], 0.99).unwrap();
        assert_eq!(c.q, 0.02);
        assert_eq!(predict_set_aps(&[0.25; 4], &c).unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        let p = uniform(2, 2);
        assert_eq!(calibrate_aps(&p, &[0, 5], 0.1), Err(ConformalError::LabelOutOfRange { label: 5, n_classes: 2 }));
        assert_eq!(calibrate_aps(&uniform(0, 2), &[], 0.1), Err(ConformalError::EmptyCalibration));
        assert_eq!(calibrate_aps(&p, &[0, 1], 1.0), Err(ConformalError::InvalidAlpha(1.0)));
    }
}
