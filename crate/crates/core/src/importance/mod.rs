//! Feature importance: seeded permutation importance for any classifier,
//! an exact interventional Shapley oracle for small feature counts, and
//! before/after importance dynamics.

mod dynamics;
mod permutation;
mod shapley;

pub use dynamics::{importance_dynamics, DynamicsReport, DynamicsRow};
pub use permutation::{log_loss, permutation_importance, PROBABILITY_FLOOR};
pub use shapley::{exact_shapley, sample_background, ShapleyResult, DEFAULT_MAX_FEATURES};

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::LearnerError;
use crate::tabular::TableError;

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("importance data has zero rows")]
    EmptyData,
    #[error("n_repeats must be at least 1")]
    InvalidRepeats,
    #[error("{d} features exceed the exact Shapley limit of {max}")]
    TooManyFeatures { d: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("feature sets differ: {0}")]
    MismatchedFeatures(String),
    #[error("profiles use different methods")]
    MismatchedMethod,
    #[error("importance for {0} is negative or non-finite")]
    InvalidImportance(String),
    #[error("importance table: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImportanceMethod {
    Permutation,
    ExactShapley,
    /// Supplied from outside, e.g. a TreeSHAP run.
    External,
}

/// Non-negative importance per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    pub method: ImportanceMethod,
    /// Data split the profile was computed on.
    pub split_tag: String,
    pub n_samples: usize,
    pub per_feature: BTreeMap<String, f64>,
    /// Unclamped permutation deltas.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ImportanceProfile {
    pub fn new(
        method: ImportanceMethod,
        split_tag: &str,
        n_samples: usize,
        per_feature: BTreeMap<String, f64>,
    ) -> Result<Self, ImportanceError> {
        if let Some((name, _)) = per_feature.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(ImportanceError::InvalidImportance(name.clone()));
        }
        Ok(Self {
            method,
            split_tag: split_tag.to_string(),
            n_samples,
            per_feature,
            raw: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn with_split_tag(mut self, tag: &str) -> Self {
        self.split_tag = tag.to_string();
        self
    }

    pub fn total(&self) -> f64 {
        self.per_feature.values().sum()
    }

    /// Each feature's fraction of the total; empty when the total is zero.
    pub fn shares(&self) -> BTreeMap<String, f64> {
        let total = self.total();
        if total <= 0.0 {
            return BTreeMap::new();
        }
        self.per_feature.iter().map(|(k, v)| (k.clone(), v / total)).collect()
    }

    /// Features by descending importance, ties by name.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.per_feature.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }

    pub fn top_feature(&self) -> Option<&str> {
        self.ranked().first().map(|(k, _)| *k)
    }

    pub fn values(&self) -> Vec<f64> {
        self.per_feature.values().copied().collect()
    }
}

/// Two-column `feature,importance` table.
pub fn write_profile_csv<W: Write>(w: W, profile: &ImportanceProfile) -> Result<(), ImportanceError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["feature", "importance"])?;
    for (name, value) in profile.ranked() {
        out.write_record([name.to_string(), value.to_string()])?;
    }
    out.flush().map_err(|e| ImportanceError::Parse(e.to_string()))?;
    Ok(())
}

/// Reads a `feature,importance` table, e.g. from an external SHAP run.
pub fn load_profile_csv<R: Read>(r: R, method: ImportanceMethod, split_tag: &str) -> Result<ImportanceProfile, ImportanceError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut per_feature = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(ImportanceError::Parse(format!("row {i} needs exactly 2 cells")));
        }
        let value: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| ImportanceError::Parse(format!("unparseable importance {:?}", &rec[1])))?;
        if per_feature.insert(rec[0].trim().to_string(), value).is_some() {
            return Err(ImportanceError::Parse(format!("duplicate feature {:?}", &rec[0])));
        }
    }
    ImportanceProfile::new(method, split_tag, 0, per_feature)
}
