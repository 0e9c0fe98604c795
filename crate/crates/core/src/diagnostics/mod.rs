//! Pre-deployment shift diagnostics: value-set Jaccard stability, label
//! entropy and top-class share, importance concentration, protective
//! features and seed-variance (knife-edge) detection.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::importance::ImportanceProfile;
use crate::report::sentinel;
use crate::stats::summarize;
use crate::tabular::{Column, FeatureTable, TableError};

pub const PROTECTIVE_MIN_JACCARD: f64 = 0.5;
pub const PROTECTIVE_MIN_SHARE: f64 = 0.15;
pub const KNIFE_EDGE_MIN_COV: f64 = 0.5;
pub const KNIFE_EDGE_MIN_STD: f64 = 0.30;
/// Number of most important features averaged by `mean_top5_jaccard`.
pub const TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("column {0:?} is numeric; Jaccard needs categorical values")]
    NumericColumn(String),
    #[error("label column is empty")]
    EmptyLabels,
    #[error("label column is not categorical")]
    NonCategoricalLabels,
    #[error("importances must be non-negative with at least one positive value")]
    DegenerateImportances,
    #[error("knife-edge check needs at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("feature {0:?} missing from one of the tables")]
    MissingFeature(String),
    #[error("no categorical feature available for Jaccard")]
    NoCategoricalFeatures,
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectiveFeature {
    pub feature: String,
    pub jaccard: f64,
    pub share: f64,
}

/// Seed-variance summary of coverages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnifeEdge {
    /// Coefficient of variation (population std / mean); infinite when the
    /// mean is zero.
    #[serde(with = "sentinel")]
    pub cov: f64,
    pub flagged: bool,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDiagnostics {
    /// Train-versus-test value-set Jaccard of each categorical feature.
    pub per_feature_jaccard: BTreeMap<String, f64>,
    /// Numeric features, for which Jaccard is not applicable.
    pub jaccard_not_applicable: Vec<String>,
    /// Mean Jaccard over the (up to) five most important categorical features.
    pub mean_top5_jaccard: f64,
    /// The single most important feature and its Jaccard (NaN if numeric).
    pub primary_feature: String,
    #[serde(with = "sentinel")]
    pub primary_feature_jaccard: f64,
    pub label_entropy_bits: f64,
    pub top_class_share: f64,
    pub concentration: f64,
    pub importance_shares: BTreeMap<String, f64>,
    pub protective_features: Vec<ProtectiveFeature>,
    pub seed_cov: Option<KnifeEdge>,
}

fn value_set(col: &Column, name: &str) -> Result<HashSet<String>, DiagnosticsError> {
    let c = col
        .as_categorical()
        .ok_or_else(|| DiagnosticsError::NumericColumn(name.to_string()))?;
    Ok((0..c.len()).filter_map(|r| c.value(r).map(str::to_string)).collect())
}

/// |A ∩ B| / |A ∪ B| of the distinct non-missing values; 1.0 when both
/// sides are empty.
pub fn jaccard_stability(train_col: &Column, test_col: &Column) -> Result<f64, DiagnosticsError> {
    let a = value_set(train_col, "train column")?;
    let b = value_set(test_col, "test column")?;
    let union = a.union(&b).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection(&b).count() as f64 / union as f64)
}

fn label_counts(labels: &Column) -> Result<Vec<usize>, DiagnosticsError> {
    let c = labels.as_categorical().ok_or(DiagnosticsError::NonCategoricalLabels)?;
    if c.is_empty() {
        return Err(DiagnosticsError::EmptyLabels);
    }
    let mut counts = vec![0usize; c.n_levels()];
    for &code in c.codes() {
        if let Some(slot) = counts.get_mut(code as usize) {
            *slot += 1;
        }
    }
    Ok(counts)
}

/// Shannon entropy in bits of the empirical label distribution.
pub fn label_entropy(labels: &Column) -> Result<f64, DiagnosticsError> {
    let counts = label_counts(labels)?;
    let n: usize = counts.iter().sum();
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * p.log2()
        })
        .sum::<f64>())
}

/// Share of the most frequent label.
pub fn top_class_share(labels: &Column) -> Result<f64, DiagnosticsError> {
    let counts = label_counts(labels)?;
    let n: usize = counts.iter().sum();
    Ok(*counts.iter().max().expect("non-empty") as f64 / n as f64)
}

/// Largest importance over the total.
pub fn concentration_index(importances: &[f64]) -> Result<f64, DiagnosticsError> {
    let sum: f64 = importances.iter().sum();
    if importances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(sum > 0.0) {
        return Err(DiagnosticsError::DegenerateImportances);
    }
    Ok(importances.iter().copied().fold(0.0, f64::max) / sum)
}

/// Non-top features with Jaccard > 0.5 and importance share > 0.15, by
/// descending share (ties by name). The top feature is the largest share,
/// ties broken by name.
pub fn find_protective_features(
    per_feature_jaccard: &BTreeMap<String, f64>,
    importance_shares: &BTreeMap<String, f64>,
) -> Vec<ProtectiveFeature> {
    let top = importance_shares
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| k.as_str());
    let mut out: Vec<ProtectiveFeature> = importance_shares
        .iter()
        .filter(|(k, _)| Some(k.as_str()) != top)
        .filter_map(|(k, &share)| {
            let j = *per_feature_jaccard.get(k)?;
            (j > PROTECTIVE_MIN_JACCARD && share > PROTECTIVE_MIN_SHARE).then(|| ProtectiveFeature {
                feature: k.clone(),
                jaccard: j,
                share,
            })
        })
        .collect();
    out.sort_by(|a, b| b.share.total_cmp(&a.share).then(a.feature.cmp(&b.feature)));
    out
}

/// Coefficient of variation of per-seed coverages; flagged when
/// CoV > 0.5 and std > 0.30, or when the mean is zero.
pub fn knife_edge_cov(coverages: &[f64]) -> Result<KnifeEdge, DiagnosticsError> {
    if coverages.len() < 2 {
        return Err(DiagnosticsError::TooFewSeeds(coverages.len()));
    }
    let s = summarize(coverages);
    let (cov, flagged) = if s.mean == 0.0 {
        (f64::INFINITY, true)
    } else {
        let cov = s.std / s.mean;
        (cov, cov > KNIFE_EDGE_MIN_COV && s.std > KNIFE_EDGE_MIN_STD)
    };
    Ok(KnifeEdge {
        cov,
        flagged,
        mean: s.mean,
        std: s.std,
        median: s.median,
        iqr: s.iqr,
    })
}

/// Full diagnostic bundle for a train/test pair and an importance profile.
///
/// Label entropy and top-class share describe the training labels.
pub fn compute_diagnostics(
    train: &FeatureTable,
    test: &FeatureTable,
    importance: &ImportanceProfile,
    seed_coverages: Option<&[f64]>,
) -> Result<ShiftDiagnostics, DiagnosticsError> {
    let mut per_feature_jaccard = BTreeMap::new();
    let mut jaccard_not_applicable = Vec::new();
    for name in train.feature_names() {
        let a = train.column_by_name(name).expect("listed feature");
        let b = test
            .column_by_name(name)
            .ok_or_else(|| DiagnosticsError::MissingFeature(name.to_string()))?;
        match (a, b) {
            (Column::Categorical(_), Column::Categorical(_)) => {
                per_feature_jaccard.insert(name.to_string(), jaccard_stability(a, b)?);
            }
            _ => jaccard_not_applicable.push(name.to_string()),
        }
    }
    let ranked = importance.ranked();
    let top: Vec<f64> = ranked
        .iter()
        .filter_map(|(k, _)| per_feature_jaccard.get(*k).copied())
        .take(TOP_K)
        .collect();
    if top.is_empty() {
        return Err(DiagnosticsError::NoCategoricalFeatures);
    }
    let primary_feature = ranked.first().map(|(k, _)| k.to_string()).unwrap_or_default();
    let primary_feature_jaccard = per_feature_jaccard.get(&primary_feature).copied().unwrap_or(f64::NAN);

    let concentration = concentration_index(&importance.values())?;
    let importance_shares = importance.shares();
    let protective_features = find_protective_features(&per_feature_jaccard, &importance_shares);
    Ok(ShiftDiagnostics {
        mean_top5_jaccard: top.iter().sum::<f64>() / top.len() as f64,
        per_feature_jaccard,
        jaccard_not_applicable,
        primary_feature,
        primary_feature_jaccard,
        label_entropy_bits: label_entropy(train.target())?,
        top_class_share: top_class_share(train.target())?,
        concentration,
        importance_shares,
        protective_features,
        seed_cov: seed_coverages.map(knife_edge_cov).transpose()?,
    })
}
