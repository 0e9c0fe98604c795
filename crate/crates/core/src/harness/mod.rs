//! Experiment orchestration: independent seed trials, walk-forward
//! retraining schedules, placebo comparisons and static-versus-adaptive
//! conformal runs.
//!
//! Seed trials and adaptive variants run on the rayon pool; results are
//! collected in input order so every run is a pure function of its inputs.

mod aci;
mod ensemble;
mod placebo;
mod retrain;

pub use aci::{compare_aci, AciRow};
pub use ensemble::{run_seed_ensemble, EnsembleSummary, SeedEnsembleResult, SeedRow};
pub use placebo::{run_placebo, DropSummary, PlaceboResult};
pub use retrain::{compare_to_baseline, run_retraining, run_schedules, Cadence, PeriodCoverage, RetrainSchedule, ScheduleResult};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conformal::ConformalError;
use crate::learner::{align_labels, Classifier, LearnerError, ModelSpec};
use crate::stats::StatsError;
use crate::tabular::{FeatureTable, TableError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("need at least {min} seeds, got {got}")]
    TooFewSeeds { min: usize, got: usize },
    #[error("horizon of {horizon} periods leaves no training data before period {start}")]
    HorizonTooLong { horizon: usize, start: i64 },
    #[error("period {0} has no rows")]
    EmptyPeriod(i64),
    #[error("class {0:?} is unknown to the fitted model")]
    UnknownLabel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Builds a fitted classifier from training rows and a seed.
pub trait ModelFactory: Sync {
    fn fit(&self, train: &FeatureTable, seed: u64) -> Result<Box<dyn Classifier>, LearnerError>;
}

impl ModelFactory for ModelSpec {
    fn fit(&self, train: &FeatureTable, seed: u64) -> Result<Box<dyn Classifier>, LearnerError> {
        ModelSpec::fit(self, train, seed)
    }
}

impl<F> ModelFactory for F
where
    F: Fn(&FeatureTable, u64) -> Result<Box<dyn Classifier>, LearnerError> + Sync,
{
    fn fit(&self, train: &FeatureTable, seed: u64) -> Result<Box<dyn Classifier>, LearnerError> {
        self(train, seed)
    }
}

/// Stream offset separating calibration-split randomness from model
/// randomness drawn with the same seed.
const SPLIT_STREAM: u64 = 1;

/// Seeded 50/50 partition of `0..n` into (calibration, evaluation); the
/// calibration half gets floor(n/2) rows.
pub fn half_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut eval = idx.split_off(n / 2);
    let mut cal = idx;
    cal.sort_unstable();
    eval.sort_unstable();
    (cal, eval)
}

/// Class indices of the rows in the model's probability columns.
pub(crate) fn model_labels(model: &dyn Classifier, rows: &FeatureTable) -> Result<Vec<usize>, HarnessError> {
    let aligned = align_labels(model.class_labels(), rows)?;
    let levels = rows.class_labels()?;
    let codes = rows.class_codes()?;
    aligned
        .into_iter()
        .zip(codes)
        .map(|(a, &c)| a.ok_or_else(|| HarnessError::UnknownLabel(levels[c as usize].clone())))
        .collect()
}

pub(crate) fn select(values: &[usize], rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&r| values[r]).collect()
}
