use serde::{Deserialize, Serialize};

use super::{run_seed_ensemble, HarnessError, ModelFactory};
use crate::report::sentinel;
use crate::tabular::{FeatureTable, TemporalSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropSummary {
    pub split: TemporalSplit,
    pub val_mean: f64,
    pub test_mean: f64,
    /// max(0, val_mean - test_mean) in percentage points.
    pub drop_pp: f64,
    pub raw_drop_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboResult {
    pub placebo: DropSummary,
    pub shift: DropSummary,
    /// placebo_drop / shift_drop; `NOT_APPLICABLE` when both are zero.
    #[serde(with = "sentinel")]
    pub ratio: f64,
}

fn drop_summary<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    split: &TemporalSplit,
    factory: &F,
    alpha: f64,
    seeds: &[u64],
) -> Result<DropSummary, HarnessError> {
    let r = run_seed_ensemble(table, split, factory, alpha, seeds)?;
    let raw = r.raw_drop_pp();
    Ok(DropSummary {
        split: *split,
        val_mean: r.summary.val_coverage.mean,
        test_mean: r.summary.test_coverage.mean,
        drop_pp: raw.max(0.0),
        raw_drop_pp: raw,
    })
}

/// Seed ensembles under a pre-shift placebo split and the real shift split.
///
/// The placebo run only sees rows before `shift_split.val_end`, so its test
/// span ends where the real test span begins and never contains the shift.
pub fn run_placebo<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    placebo_split: &TemporalSplit,
    shift_split: &TemporalSplit,
    factory: &F,
    alpha: f64,
    seeds: &[u64],
) -> Result<PlaceboResult, HarnessError> {
    placebo_split.validate()?;
    shift_split.validate()?;
    if placebo_split.val_end > shift_split.val_end {
        return Err(HarnessError::InvalidConfig(
            "placebo split must end before the shift test span".into(),
        ));
    }
    let pre: Vec<usize> = (0..table.n_rows())
        .filter(|&r| table.timestamps()[r] < shift_split.val_end)
        .collect();
    let placebo = drop_summary(&table.take(&pre), placebo_split, factory, alpha, seeds)?;
    let shift = drop_summary(table, shift_split, factory, alpha, seeds)?;
    let ratio = if shift.drop_pp == 0.0 {
        if placebo.drop_pp == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        placebo.drop_pp / shift.drop_pp
    };
    Ok(PlaceboResult { placebo, shift, ratio })
}
