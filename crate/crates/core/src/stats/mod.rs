//! Rank and product-moment correlation, bootstrap intervals, permutation
//! tests, the Wilcoxon signed-rank test and descriptive summaries.

mod correlation;
mod descriptive;
mod resampling;
mod wilcoxon;

pub use correlation::{average_ranks, correlation, pearson, spearman, CorrelationKind, CorrelationResult};
pub use descriptive::{mean, population_std, quantile_type7, summarize, Summary};
pub use resampling::{bootstrap_ci, correlation_test, permutation_p, BootstrapCi, BOOTSTRAP_RETRY_CAP, EXACT_PERMUTATION_MAX_N};
pub use wilcoxon::{wilcoxon_signed_rank, PairedTestResult, TestMethod, EXACT_WILCOXON_MAX_N};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("correlation undefined for a constant input vector")]
    ConstantInput,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("{failed} of {n_boot} bootstrap resamples stayed constant after retries")]
    BootstrapDegenerate { failed: usize, n_boot: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("input contains non-finite values")]
    NonFinite,
}
