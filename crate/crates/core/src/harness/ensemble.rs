use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{half_split, model_labels, select, HarnessError, ModelFactory};
use crate::conformal::{aps_coverage, calibrate_aps};
use crate::stats::{summarize, Summary};
use crate::tabular::{apply_split, FeatureTable, TemporalSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub val_coverage: f64,
    pub test_coverage: f64,
    pub mean_set_size_val: f64,
    pub mean_set_size_test: f64,
    /// APS cutoff fitted on the calibration half.
    pub threshold: f64,
    pub n_cal: usize,
    pub n_val_eval: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub val_coverage: Summary,
    pub test_coverage: Summary,
    pub mean_set_size_val: Summary,
    pub mean_set_size_test: Summary,
}

impl EnsembleSummary {
    pub fn from_rows(rows: &[SeedRow]) -> Self {
        let col = |f: fn(&SeedRow) -> f64| summarize(&rows.iter().map(f).collect::<Vec<_>>());
        Self {
            val_coverage: col(|r| r.val_coverage),
            test_coverage: col(|r| r.test_coverage),
            mean_set_size_val: col(|r| r.mean_set_size_val),
            mean_set_size_test: col(|r| r.mean_set_size_test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEnsembleResult {
    pub alpha: f64,
    pub split: TemporalSplit,
    pub per_seed: Vec<SeedRow>,
    pub summary: EnsembleSummary,
}

impl SeedEnsembleResult {
    /// Mean validation coverage minus mean test coverage, in percentage
    /// points (unfloored).
    pub fn raw_drop_pp(&self) -> f64 {
        100.0 * (self.summary.val_coverage.mean - self.summary.test_coverage.mean)
    }
}

pub(crate) fn seed_trial<F: ModelFactory + ?Sized>(
    train: &FeatureTable,
    val: &FeatureTable,
    test: &FeatureTable,
    factory: &F,
    alpha: f64,
    seed: u64,
) -> Result<SeedRow, HarnessError> {
    let model = factory.fit(train, seed)?;
    let val_probs = model.predict_proba(val)?;
    let val_labels = model_labels(model.as_ref(), val)?;
    let (cal, eval) = half_split(val.n_rows(), seed);
    if cal.is_empty() || eval.is_empty() {
        return Err(HarnessError::EmptySplit("validation half"));
    }
    let calib = calibrate_aps(&val_probs.select(&cal), &select(&val_labels, &cal), alpha)?;
    let val_report = aps_coverage(&val_probs.select(&eval), &select(&val_labels, &eval), calib.threshold)?;
    let test_probs = model.predict_proba(test)?;
    let test_report = aps_coverage(&test_probs, &model_labels(model.as_ref(), test)?, calib.threshold)?;
    Ok(SeedRow {
        seed,
        val_coverage: val_report.empirical_coverage,
        test_coverage: test_report.empirical_coverage,
        mean_set_size_val: val_report.mean_set_size,
        mean_set_size_test: test_report.mean_set_size,
        threshold: calib.threshold,
        n_cal: calib.n_cal,
        n_val_eval: val_report.n_eval,
        n_test: test_report.n_eval,
    })
}

/// Independent per-seed trials: fit with seed s, split validation 50/50
/// with seed s, calibrate APS on one half, and score the other half and the
/// test span.
pub fn run_seed_ensemble<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    split: &TemporalSplit,
    factory: &F,
    alpha: f64,
    seeds: &[u64],
) -> Result<SeedEnsembleResult, HarnessError> {
    if seeds.len() < 2 {
        return Err(HarnessError::TooFewSeeds { min: 2, got: seeds.len() });
    }
    let (train, val, test) = apply_split(table, split)?;
    for (name, t) in [("train", &train), ("validation", &val), ("test", &test)] {
        if t.is_empty() {
            return Err(HarnessError::EmptySplit(name));
        }
    }
    let per_seed: Vec<SeedRow> = seeds
        .par_iter()
        .map(|&s| seed_trial(&train, &val, &test, factory, alpha, s))
        .collect::<Result<_, _>>()?;
    Ok(SeedEnsembleResult {
        alpha,
        split: *split,
        summary: EnsembleSummary::from_rows(&per_seed),
        per_seed,
    })
}
