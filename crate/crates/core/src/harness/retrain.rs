use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{half_split, model_labels, select, HarnessError, ModelFactory};
use crate::conformal::{aps_coverage, calibrate_aps};
use crate::learner::Classifier;
use crate::stats::{summarize, wilcoxon_signed_rank, PairedTestResult};
use crate::tabular::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cadence {
    None,
    Monthly,
    Quarterly,
    Biannual,
}

impl Cadence {
    pub const ALL: [Cadence; 4] = [Cadence::None, Cadence::Monthly, Cadence::Quarterly, Cadence::Biannual];

    /// Periods between retrains; `None` never retrains.
    pub fn period(self) -> Option<usize> {
        match self {
            Cadence::None => None,
            Cadence::Monthly => Some(1),
            Cadence::Quarterly => Some(3),
            Cadence::Biannual => Some(6),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cadence::None => "NONE",
            Cadence::Monthly => "MONTHLY",
            Cadence::Quarterly => "QUARTERLY",
            Cadence::Biannual => "BIANNUAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainSchedule {
    pub cadence: Cadence,
    /// Number of evaluation periods at the end of the table.
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCoverage {
    /// Position within the horizon, from 0.
    pub index: usize,
    pub period: i64,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub n_eval: usize,
    /// Whether the model and calibration were refreshed at this period.
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub cadence: Cadence,
    pub horizon: usize,
    pub trace: Vec<PeriodCoverage>,
    pub mean: f64,
    pub min: f64,
    pub std: f64,
    pub retrain_count: usize,
    pub retrain_periods: Vec<i64>,
    /// Wilcoxon test of this trace against a baseline trace, when compared.
    pub paired_vs_baseline: Option<PairedTestResult>,
}

impl ScheduleResult {
    pub fn coverages(&self) -> Vec<f64> {
        self.trace.iter().map(|p| p.coverage).collect()
    }
}

struct Deployed {
    model: Box<dyn Classifier>,
    threshold: f64,
}

/// Fits on every row before `period - 1` plus the evaluation half of
/// period `period - 1`, and calibrates on the other half of that period.
fn deploy<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    period: i64,
    factory: &F,
    alpha: f64,
    seed: u64,
) -> Result<Deployed, HarnessError> {
    let ts = table.timestamps();
    let recent: Vec<usize> = (0..table.n_rows()).filter(|&r| ts[r] == period - 1).collect();
    if recent.len() < 2 {
        return Err(HarnessError::EmptyPeriod(period - 1));
    }
    let (cal_pos, fit_pos) = half_split(recent.len(), seed);
    let cal_rows = select(&recent, &cal_pos);
    let mut fit_rows: Vec<usize> = (0..table.n_rows()).filter(|&r| ts[r] < period - 1).collect();
    fit_rows.extend(select(&recent, &fit_pos));
    fit_rows.sort_unstable();

    let model = factory.fit(&table.take(&fit_rows), seed)?;
    let cal = table.take(&cal_rows);
    let calib = calibrate_aps(&model.predict_proba(&cal)?, &model_labels(model.as_ref(), &cal)?, alpha)?;
    Ok(Deployed {
        model,
        threshold: calib.threshold,
    })
}

/// Walk-forward replay over the last `horizon` periods.
///
/// A model is deployed at the first horizon period, and redeployed at every
/// later horizon index divisible by the cadence; each deployment refits on
/// all earlier data and recalibrates on the most recent completed period.
/// Every horizon period is scored with the model deployed at its start.
pub fn run_retraining<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    schedule: &RetrainSchedule,
    factory: &F,
    alpha: f64,
    seed: u64,
) -> Result<ScheduleResult, HarnessError> {
    if schedule.horizon == 0 {
        return Err(HarnessError::InvalidConfig("horizon must be at least 1".into()));
    }
    let ts = table.timestamps();
    let (min_ts, max_ts) = match (ts.iter().min(), ts.iter().max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(HarnessError::EmptySplit("table")),
    };
    let start = max_ts - schedule.horizon as i64 + 1;
    if start - 1 <= min_ts {
        return Err(HarnessError::HorizonTooLong {
            horizon: schedule.horizon,
            start,
        });
    }

    let mut deployed = deploy(table, start, factory, alpha, seed)?;
    let mut trace = Vec::with_capacity(schedule.horizon);
    let mut retrain_periods = Vec::new();
    for index in 0..schedule.horizon {
        let period = start + index as i64;
        let retrain = index > 0 && schedule.cadence.period().is_some_and(|c| index % c == 0);
        if retrain {
            deployed = deploy(table, period, factory, alpha, seed)?;
            retrain_periods.push(period);
        }
        let rows: Vec<usize> = (0..table.n_rows()).filter(|&r| ts[r] == period).collect();
        if rows.is_empty() {
            return Err(HarnessError::EmptyPeriod(period));
        }
        let eval = table.take(&rows);
        let report = aps_coverage(
            &deployed.model.predict_proba(&eval)?,
            &model_labels(deployed.model.as_ref(), &eval)?,
            deployed.threshold,
        )?;
        trace.push(PeriodCoverage {
            index,
            period,
            coverage: report.empirical_coverage,
            mean_set_size: report.mean_set_size,
            n_eval: report.n_eval,
            retrained: retrain,
        });
    }
    let s = summarize(&trace.iter().map(|p| p.coverage).collect::<Vec<_>>());
    Ok(ScheduleResult {
        cadence: schedule.cadence,
        horizon: schedule.horizon,
        trace,
        mean: s.mean,
        min: s.min,
        std: s.std,
        retrain_count: retrain_periods.len(),
        retrain_periods,
        paired_vs_baseline: None,
    })
}

/// Attaches the paired Wilcoxon test of `result` against `baseline`.
/// Identical traces leave the comparison empty.
pub fn compare_to_baseline(result: &mut ScheduleResult, baseline: &ScheduleResult) -> Result<(), HarnessError> {
    let (a, b) = (result.coverages(), baseline.coverages());
    result.paired_vs_baseline = if a == b {
        None
    } else {
        Some(wilcoxon_signed_rank(&a, &b)?)
    };
    Ok(())
}

/// Runs each cadence and compares every non-`NONE` trace against `NONE`.
pub fn run_schedules<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    cadences: &[Cadence],
    horizon: usize,
    factory: &F,
    alpha: f64,
    seed: u64,
) -> Result<Vec<ScheduleResult>, HarnessError> {
    let mut wanted = vec![Cadence::None];
    wanted.extend(cadences.iter().copied().filter(|c| *c != Cadence::None));
    let mut results: Vec<ScheduleResult> = wanted
        .par_iter()
        .map(|&cadence| run_retraining(table, &RetrainSchedule { cadence, horizon }, factory, alpha, seed))
        .collect::<Result<_, _>>()?;
    let baseline = results[0].clone();
    for r in results.iter_mut().skip(1) {
        compare_to_baseline(r, &baseline)?;
    }
    if !cadences.contains(&Cadence::None) {
        results.remove(0);
    }
    Ok(results)
}
