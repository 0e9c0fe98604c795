use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::correlation::{average_ranks, check_pair, pearson_raw};
use super::{correlation, CorrelationKind, CorrelationResult, StatsError};

/// Redraws allowed for a resample whose statistic is undefined.
pub const BOOTSTRAP_RETRY_CAP: usize = 100;
/// Spearman permutation tests enumerate all n! orderings up to this n.
pub const EXACT_PERMUTATION_MAX_N: usize = 8;
/// Skipped resamples beyond this fraction make the interval an error.
const MAX_SKIPPED_FRACTION: f64 = 0.10;
/// Ties of |statistic| with the observed value count as extreme.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    /// Resamples dropped after exhausting the retry cap.
    pub skipped: usize,
}

/// Index of the order statistic at cumulative fraction `p` of `n`
/// (the ceil(n·p)-th smallest, 0-based).
fn order_index(n: usize, p: f64) -> usize {
    let k = (n as f64 * p - 1e-9).ceil() as usize;
    k.clamp(1, n) - 1
}

/// Percentile bootstrap over paired resamples.
pub fn bootstrap_ci(
    x: &[f64],
    y: &[f64],
    kind: CorrelationKind,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCi, StatsError> {
    check_pair(x, y, 3)?;
    if n_boot == 0 || !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidParameter(
            "n_boot must be positive and level in (0, 1)".into(),
        ));
    }
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(n_boot);
    let mut skipped = 0;
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..n_boot {
        let mut value = None;
        for _ in 0..BOOTSTRAP_RETRY_CAP {
            for i in 0..n {
                let j = rng.gen_range(0..n);
                bx[i] = x[j];
                by[i] = y[j];
            }
            value = match kind {
                CorrelationKind::Pearson => pearson_raw(&bx, &by),
                CorrelationKind::Spearman => pearson_raw(&average_ranks(&bx), &average_ranks(&by)),
            };
            if value.is_some() {
                break;
            }
        }
        match value {
            Some(v) => stats.push(v),
            None => skipped += 1,
        }
    }
    if skipped as f64 > MAX_SKIPPED_FRACTION * n_boot as f64 || stats.is_empty() {
        return Err(StatsError::BootstrapDegenerate {
            failed: skipped,
            n_boot,
        });
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        low: stats[order_index(stats.len(), tail)],
        high: stats[order_index(stats.len(), 1.0 - tail)],
        skipped,
    })
}

/// Visits every permutation of `items` (Heap's algorithm).
fn for_each_permutation(items: &mut [f64], mut visit: impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Two-tailed permutation p-value for the correlation.
///
/// Spearman with n <= 8 enumerates all n! orderings and returns the exact
/// fraction (seed unused). Otherwise `n_perm` seeded shuffles are drawn and
/// p = (1 + #extreme) / (1 + n_perm).
pub fn permutation_p(
    x: &[f64],
    y: &[f64],
    kind: CorrelationKind,
    n_perm: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    let observed = correlation(kind, x, y)?.abs();
    let (xs, mut ys) = match kind {
        CorrelationKind::Pearson => (x.to_vec(), y.to_vec()),
        CorrelationKind::Spearman => (average_ranks(x), average_ranks(y)),
    };
    let stat = |ys: &[f64]| pearson_raw(&xs, ys).expect("non-constant inputs").abs();

    if kind == CorrelationKind::Spearman && x.len() <= EXACT_PERMUTATION_MAX_N {
        let (mut extreme, mut total) = (0u64, 0u64);
        for_each_permutation(&mut ys, |perm| {
            total += 1;
            if stat(perm) >= observed - TIE_TOLERANCE {
                extreme += 1;
            }
        });
        return Ok(extreme as f64 / total as f64);
    }
    if n_perm == 0 {
        return Err(StatsError::InvalidParameter("n_perm must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        ys.shuffle(&mut rng);
        if stat(&ys) >= observed - TIE_TOLERANCE {
            extreme += 1;
        }
    }
    Ok((1 + extreme) as f64 / (1 + n_perm) as f64)
}

/// Estimate, bootstrap interval and permutation p-value in one record.
pub fn correlation_test(
    kind: CorrelationKind,
    x: &[f64],
    y: &[f64],
    n_boot: usize,
    n_perm: usize,
    seed: u64,
) -> Result<CorrelationResult, StatsError> {
    let estimate = correlation(kind, x, y)?;
    let ci = bootstrap_ci(x, y, kind, n_boot, 0.95, seed)?;
    let p = permutation_p(x, y, kind, n_perm, seed.wrapping_add(1))?;
    Ok(CorrelationResult {
        kind,
        estimate,
        ci_low: Some(ci.low),
        ci_high: Some(ci.high),
        p_value: Some(p),
        n: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_positions() {
        assert_eq!(order_index(10_000, 0.025), 249);
        assert_eq!(order_index(10_000, 0.975), 9749);
        assert_eq!(order_index(10, 0.0), 0);
    }

    #[test]
    fn identical_vectors_give_degenerate_interval() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ci = bootstrap_ci(&x, &x, CorrelationKind::Pearson, 2000, 0.95, 1).unwrap();
        assert!((ci.low - 1.0).abs() < 1e-12 && (ci.high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anti_monotone_upper_bound_non_positive() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v * v).collect();
        let ci = bootstrap_ci(&x, &y, CorrelationKind::Spearman, 10_000, 0.95, 3).unwrap();
        assert!(ci.high <= 0.0);
    }

    #[test]
    fn degenerate_bootstrap_errors() {
        let x = vec![2.0; 6];
        let y: Vec<f64> = (0..6).map(f64::from).collect();
        assert!(matches!(
            bootstrap_ci(&x, &y, CorrelationKind::Pearson, 200, 0.95, 0),
            Err(StatsError::BootstrapDegenerate { .. })
        ));
    }

    #[test]
    fn exact_enumeration_n3() {
        let p = permutation_p(&[1., 2., 3.], &[1., 2., 3.], CorrelationKind::Spearman, 0, 0).unwrap();
        assert!((p - 2.0 / 6.0).abs() < 1e-15);
        let q = permutation_p(&[1., 2., 3.], &[1., 2., 3.], CorrelationKind::Spearman, 0, 99).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn one_discordant_pair_is_significant() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let y = [1., 2., 3., 5., 4., 6., 7., 8.];
        let p = permutation_p(&x, &y, CorrelationKind::Spearman, 0, 0).unwrap();
        assert!(p < 0.05);
    }

    #[test]
    fn centered_statistic_gives_large_p() {
        let x = [1., 2., 3., 4., 5., 6., 7., 8., 9., 10.];
        let y = [1., -1., -1., 1., 0., 0., 1., -1., -1., 1.];
        let p = permutation_p(&x, &y, CorrelationKind::Pearson, 2000, 5).unwrap();
        assert!(p > 0.9, "{p}");
    }
}
