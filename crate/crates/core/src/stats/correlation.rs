use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

/// A correlation estimate, optionally with its bootstrap interval and
/// permutation p-value.
///
/// For the percentile bootstrap on very small samples `ci_low <= estimate
/// <= ci_high` does not always hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub kind: CorrelationKind,
    pub estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
}

pub(crate) fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooFewPoints { n: x.len(), min });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Product-moment correlation without input validation beyond constancy.
pub(crate) fn pearson_raw(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn estimate_only(kind: CorrelationKind, estimate: f64, n: usize) -> CorrelationResult {
    CorrelationResult {
        kind,
        estimate,
        ci_low: None,
        ci_high: None,
        p_value: None,
        n,
    }
}

/// Point estimate of the chosen correlation.
pub fn correlation(kind: CorrelationKind, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    let r = match kind {
        CorrelationKind::Pearson => pearson_raw(x, y),
        CorrelationKind::Spearman => pearson_raw(&average_ranks(x), &average_ranks(y)),
    };
    r.ok_or(StatsError::ConstantInput)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let r = correlation(CorrelationKind::Pearson, x, y)?;
    Ok(estimate_only(CorrelationKind::Pearson, r, x.len()))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let r = correlation(CorrelationKind::Spearman, x, y)?;
    Ok(estimate_only(CorrelationKind::Spearman, r, x.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert!((spearman(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap().estimate - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap().estimate, 1.0);
        assert_eq!(spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap().estimate, -1.0);
        let r = pearson(&[1., 2., 3.], &[1., 2., 4.]).unwrap().estimate;
        assert!((r - 0.981_980_506_061_965_7).abs() < 1e-12);
        assert!((pearson(&[1., 2., 3.], &[5., 7., 9.]).unwrap().estimate - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[-1., 0., 1.], &[1., -2., 1.]).unwrap().estimate, 0.0);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3., 1., 3., 2.]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(pearson(&[1., 1., 1.], &[1., 2., 3.]), Err(StatsError::ConstantInput));
        assert_eq!(spearman(&[1., 2.], &[1., 2.]), Err(StatsError::TooFewPoints { n: 2, min: 3 }));
        assert_eq!(spearman(&[1., 2., 3.], &[1., 2.]), Err(StatsError::LengthMismatch(3, 2)));
        assert_eq!(pearson(&[1., f64::NAN, 3.], &[1., 2., 3.]), Err(StatsError::NonFinite));
    }
}
