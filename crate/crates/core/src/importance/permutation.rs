use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ImportanceError, ImportanceMethod, ImportanceProfile};
use crate::learner::{align_labels, Classifier, ProbabilityMatrix};
use crate::tabular::FeatureTable;

/// Probabilities are clipped here before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Mean negative log-probability of the true class; classes unknown to the
/// model score as the floor.
pub fn log_loss(probs: &ProbabilityMatrix, labels: &[Option<usize>]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p = l.map_or(0.0, |c| probs.row(i)[c]);
            -p.max(PROBABILITY_FLOOR).ln()
        })
        .sum();
    total / labels.len() as f64
}

/// Mean increase in log-loss when one feature column is shuffled.
///
/// Feature j draws its permutations from stream j of a ChaCha generator
/// seeded with `seed`, so the result does not depend on scheduling.
/// Negative deltas are clamped to zero in `per_feature` and kept in `raw`.
pub fn permutation_importance(
    model: &dyn Classifier,
    data: &FeatureTable,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceProfile, ImportanceError> {
    if n_repeats == 0 {
        return Err(ImportanceError::InvalidRepeats);
    }
    let n = data.n_rows();
    if n == 0 {
        return Err(ImportanceError::EmptyData);
    }
    let features = data.feature_indices();
    let names: Vec<String> = features.iter().map(|&i| data.column_names()[i].clone()).collect();
    if n == 1 {
        let zeros = names.iter().map(|k| (k.clone(), 0.0)).collect::<BTreeMap<_, _>>();
        let mut p = ImportanceProfile::new(ImportanceMethod::Permutation, "data", n, zeros.clone())?;
        p.raw = zeros;
        p.warnings
            .push("single-row data: every permutation is the identity, importances set to 0".into());
        return Ok(p);
    }

    let labels = align_labels(model.class_labels(), data)?;
    let baseline = log_loss(&model.predict_proba(data)?, &labels);
    let deltas: Vec<f64> = features
        .par_iter()
        .enumerate()
        .map(|(j, &col)| -> Result<f64, ImportanceError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut sum = 0.0;
            for _ in 0..n_repeats {
                perm.shuffle(&mut rng);
                let shuffled = data.with_column(col, data.column(col).take(&perm))?;
                sum += log_loss(&model.predict_proba(&shuffled)?, &labels) - baseline;
            }
            Ok(sum / n_repeats as f64)
        })
        .collect::<Result<_, _>>()?;

    let raw: BTreeMap<String, f64> = names.iter().cloned().zip(deltas.iter().copied()).collect();
    let clamped = raw.iter().map(|(k, v)| (k.clone(), v.max(0.0))).collect();
    let mut profile = ImportanceProfile::new(ImportanceMethod::Permutation, "data", n, clamped)?;
    profile.raw = raw;
    Ok(profile)
}
