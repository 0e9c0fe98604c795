use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::correlation::average_ranks;
use super::StatsError;

/// The exact null distribution is used up to this many nonzero pairs.
pub const EXACT_WILCOXON_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    /// min(W+, W-).
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

/// Two-tailed Wilcoxon signed-rank test of the paired differences `a - b`.
///
/// Zero differences are dropped and tied magnitudes share average ranks.
/// Up to 25 nonzero pairs the p-value is exact over all 2^n sign
/// assignments; beyond that a continuity-corrected normal approximation
/// with the tie-corrected variance is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<PairedTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::AllZeroDifferences);
    }
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w = w_plus.min(total - w_plus);

    if n <= EXACT_WILCOXON_MAX_N {
        // Average ranks are multiples of 1/2, so doubled ranks are integers
        // and the null distribution of doubled W+ is a subset-sum count.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let limit = (2.0 * w).round() as usize;
        let tail: u64 = counts[..=limit].iter().sum();
        let p = (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0);
        return Ok(PairedTestResult {
            statistic: w,
            p_value: p,
            n_effective: n,
            method: TestMethod::Exact,
        });
    }

    let mean = total / 2.0;
    let sd = (ranks.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
    let z = ((w - mean + 0.5) / sd).min(0.0);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(PairedTestResult {
        statistic: w,
        p_value: (2.0 * normal.cdf(z)).min(1.0),
        n_effective: n,
        method: TestMethod::NormalApprox,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_dominance_n5() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.0625);
        assert_eq!(r.method, TestMethod::Exact);
    }

    #[test]
    fn zero_differences() {
        assert_eq!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::AllZeroDifferences)
        );
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.n_effective, 1);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn large_n_uses_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 10.0 } else { -10.0 }).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }
}
