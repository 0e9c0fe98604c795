use super::{Classifier, LearnerError, ProbabilityMatrix};
use crate::tabular::FeatureTable;

/// Predicts the training label distribution for every row.
#[derive(Debug, Clone)]
pub struct FrequencyClassifier {
    labels: Vec<String>,
    distribution: Vec<f64>,
}

impl FrequencyClassifier {
    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }
}

/// The seed is accepted for interface symmetry and ignored.
pub fn fit_frequency_classifier(
    train: &FeatureTable,
    _seed: u64,
) -> Result<FrequencyClassifier, LearnerError> {
    if train.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let labels = train.class_labels()?.to_vec();
    let mut counts = vec![0usize; labels.len()];
    for &c in train.class_codes()? {
        counts[c as usize] += 1;
    }
    let n = train.n_rows() as f64;
    Ok(FrequencyClassifier {
        labels,
        distribution: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

impl Classifier for FrequencyClassifier {
    fn class_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, rows: &FeatureTable) -> Result<ProbabilityMatrix, LearnerError> {
        let values = self.distribution.repeat(rows.n_rows());
        Ok(ProbabilityMatrix {
            n_classes: self.labels.len(),
            values,
        })
    }
}
