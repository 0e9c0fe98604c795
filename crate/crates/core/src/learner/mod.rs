//! Model-agnostic classifier and quantile-regressor interfaces with small
//! reference implementations.
//!
//! The conformal layer only ever sees a [`ProbabilityMatrix`] or per-row
//! `(lo, hi)` pairs, so any external model can be plugged in through
//! [`load_probabilities`].

mod external;
mod frequency;
mod quantile;
mod trees;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{FeatureTable, TableError};

pub use external::{load_probabilities, write_probabilities};
pub use frequency::{fit_frequency_classifier, FrequencyClassifier};
pub use quantile::{fit_grouped_quantiles, GroupedQuantiles, MIN_GROUP_ROWS};
pub use trees::{fit_bagged_trees, BaggedTrees, TreeConfig};

/// Row sums of a probability matrix must match 1 within this tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training table is empty")]
    EmptyTrain,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("feature {0:?} missing from prediction rows")]
    MissingFeature(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("row {row} is not a probability vector (sum {sum})")]
    NotSimplex { row: usize, sum: f64 },
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("external scores: {0}")]
    External(String),
}

/// Dense row-major `n_rows × n_classes` matrix of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    n_classes: usize,
    values: Vec<f64>,
}

impl ProbabilityMatrix {
    /// Validates every row: entries non-negative and summing to one.
    pub fn new(n_classes: usize, values: Vec<f64>) -> Result<Self, LearnerError> {
        if n_classes == 0 || values.len() % n_classes != 0 {
            return Err(LearnerError::Shape(format!(
                "{} values do not divide into rows of {n_classes}",
                values.len()
            )));
        }
        for (row, chunk) in values.chunks(n_classes).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if chunk.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(LearnerError::NotSimplex { row, sum });
            }
        }
        Ok(Self { n_classes, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LearnerError> {
        let n_classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_classes) {
            return Err(LearnerError::Shape("ragged rows".into()));
        }
        Self::new(n_classes, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_classes)
    }

    /// Sub-matrix of the selected rows, in order.
    pub fn select(&self, rows: &[usize]) -> ProbabilityMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_classes);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        ProbabilityMatrix {
            n_classes: self.n_classes,
            values,
        }
    }

    /// Index of the most probable class, lowest index on ties.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        best
    }
}

/// A fitted probabilistic classifier.
///
/// Probability columns follow [`Classifier::class_labels`], which is the
/// target's level list at fit time. Class codes of rows taken from the same
/// table (or splits of it) index these columns directly.
pub trait Classifier: Send + Sync + Debug {
    fn class_labels(&self) -> &[String];

    fn n_classes(&self) -> usize {
        self.class_labels().len()
    }

    fn predict_proba(&self, rows: &FeatureTable) -> Result<ProbabilityMatrix, LearnerError>;
}

/// Column index in `labels` of each row's class, or `None` for a class
/// the model never saw.
pub fn align_labels(labels: &[String], rows: &FeatureTable) -> Result<Vec<Option<usize>>, LearnerError> {
    let codes = rows.class_codes()?;
    let levels = rows.class_labels()?;
    let map: Vec<Option<usize>> = if levels.len() <= labels.len() && labels[..levels.len()] == *levels {
        (0..levels.len()).map(Some).collect()
    } else {
        levels
            .iter()
            .map(|l| labels.iter().position(|m| m == l))
            .collect()
    };
    Ok(codes.iter().map(|&c| map[c as usize]).collect())
}

/// A fitted lower/upper quantile regressor.
pub trait QuantileModel: Send + Sync + Debug {
    fn levels(&self) -> (f64, f64);

    /// Per-row `(lo, hi)` with `lo <= hi`.
    fn predict(&self, rows: &FeatureTable) -> Result<Vec<(f64, f64)>, LearnerError>;
}

/// Serializable classifier choice; the harness uses it as a seeded model
/// factory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Frequency,
    BaggedTrees(TreeConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::BaggedTrees(TreeConfig::default())
    }
}

impl ModelSpec {
    pub fn fit(&self, train: &FeatureTable, seed: u64) -> Result<Box<dyn Classifier>, LearnerError> {
        Ok(match self {
            ModelSpec::Frequency => Box::new(fit_frequency_classifier(train, seed)?),
            ModelSpec::BaggedTrees(cfg) => Box::new(fit_bagged_trees(train, cfg, seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_simplex_rows() {
        assert!(ProbabilityMatrix::from_rows(&[vec![0.5, 0.4]]).is_err());
        assert!(ProbabilityMatrix::from_rows(&[vec![1.2, -0.2]]).is_err());
        assert!(ProbabilityMatrix::from_rows(&[vec![f64::NAN, 1.0]]).is_err());
        let m = ProbabilityMatrix::from_rows(&[vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.argmax(0), 1);
        assert_eq!(m.argmax(1), 0);
        assert_eq!(m.select(&[1]).row(0), &[0.5, 0.5]);
    }

    #[test]
    fn aligns_labels_by_name() {
        use crate::tabular::{CategoricalColumn, Column};
        let t = FeatureTable::new(
            vec![(
                "y".into(),
                Column::Categorical(CategoricalColumn::from_strings(["b", "z", "a"])),
            )],
            "y",
            "ts",
            vec![0; 3],
        )
        .unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        assert_eq!(align_labels(&labels, &t).unwrap(), vec![Some(1), None, Some(0)]);
    }
}
