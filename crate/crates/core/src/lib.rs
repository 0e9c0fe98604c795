//! Conformal prediction under distribution shift: prediction sets and
//! intervals, shift diagnostics, feature importance, statistics, experiment
//! harnesses and a deployment verdict engine.

pub mod conformal;
pub mod diagnostics;
pub mod harness;
pub mod importance;
pub mod learner;
pub mod report;
pub mod stats;
pub mod tabular;
pub mod verdict;

use thiserror::Error;

/// Any error raised by the library, tagged by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("table: {0}")]
    Table(#[from] tabular::TableError),
    #[error("learner: {0}")]
    Learner(#[from] learner::LearnerError),
    #[error("conformal: {0}")]
    Conformal(#[from] conformal::ConformalError),
    #[error("diagnostics: {0}")]
    Diagnostics(#[from] diagnostics::DiagnosticsError),
    #[error("importance: {0}")]
    Importance(#[from] importance::ImportanceError),
    #[error("stats: {0}")]
    Stats(#[from] stats::StatsError),
    #[error("harness: {0}")]
    Harness(#[from] harness::HarnessError),
    #[error("verdict: {0}")]
    Verdict(#[from] verdict::VerdictError),
    #[error("report: {0}")]
    Report(#[from] report::ReportError),
}
