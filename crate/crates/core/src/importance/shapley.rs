use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ImportanceError, ImportanceMethod, ImportanceProfile};
use crate::learner::Classifier;
use crate::tabular::{CategoricalColumn, Column, FeatureTable, MISSING};

pub const DEFAULT_MAX_FEATURES: usize = 12;

/// Signed per-class attributions plus their mean-absolute profile.
#[derive(Debug, Clone)]
pub struct ShapleyResult {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    /// `phi[row][feature][class]`.
    pub phi: Vec<Vec<Vec<f64>>>,
    /// v(empty set) per row and class: the background-mean prediction.
    pub base: Vec<Vec<f64>>,
    /// v(all features) per row and class.
    pub full: Vec<Vec<f64>>,
    /// Mean over rows of the mean over classes of |phi|.
    pub profile: ImportanceProfile,
}

/// Seeded subsample of at most `size` rows, in table order.
pub fn sample_background(train: &FeatureTable, size: usize, seed: u64) -> FeatureTable {
    let n = train.n_rows();
    if n <= size {
        return train.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n, size).into_vec();
    rows.sort_unstable();
    train.take(&rows)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Column of `blocks * b` rows: block s copies row `x_row` of `x_col` when
/// bit `bit` of s is set, and the background column otherwise.
fn hybrid_column(
    x_col: &Column,
    x_row: usize,
    bg_col: &Column,
    bit: usize,
    blocks: usize,
) -> Result<Column, ImportanceError> {
    let b = bg_col.len();
    let pick = |s: usize| (s >> bit) & 1 == 1;
    match (x_col, bg_col) {
        (Column::Numeric(xv), Column::Numeric(bv)) => Ok(Column::Numeric(
            (0..blocks)
                .flat_map(|s| (0..b).map(move |i| if pick(s) { xv[x_row] } else { bv[i] }))
                .collect(),
        )),
        (Column::Categorical(xc), Column::Categorical(bc)) => {
            let mut levels = bc.shared_levels();
            let x_code = if Arc::ptr_eq(&xc.shared_levels(), &levels) {
                xc.codes()[x_row]
            } else {
                match xc.value(x_row) {
                    None => MISSING,
                    Some(v) => match bc.code_of(v) {
                        Some(c) => c,
                        None => {
                            let mut extended = (*levels).clone();
                            extended.push(v.to_string());
                            levels = Arc::new(extended);
                            (levels.len() - 1) as u32
                        }
                    },
                }
            };
            let codes = (0..blocks)
                .flat_map(|s| {
                    (0..b).map(move |i| if pick(s) { x_code } else { bc.codes()[i] })
                })
                .collect();
            Ok(Column::Categorical(CategoricalColumn::from_parts(codes, levels)?))
        }
        _ => Err(ImportanceError::MismatchedFeatures(
            "a feature is numeric in one table and categorical in the other".into(),
        )),
    }
}

/// Exact interventional Shapley values by enumerating all 2^d coalitions.
///
/// v(S) for row x is the mean over background rows b of the model's class
/// probabilities on the hybrid row taking features in S from x and the
/// rest from b.
pub fn exact_shapley(
    model: &dyn Classifier,
    data: &FeatureTable,
    background: &FeatureTable,
    max_features: usize,
) -> Result<ShapleyResult, ImportanceError> {
    let features = data.feature_indices();
    let d = features.len();
    if d > max_features {
        return Err(ImportanceError::TooManyFeatures { d, max: max_features });
    }
    if background.is_empty() {
        return Err(ImportanceError::EmptyBackground);
    }
    if data.is_empty() {
        return Err(ImportanceError::EmptyData);
    }
    let names: Vec<String> = features.iter().map(|&i| data.column_names()[i].clone()).collect();
    let bg_index: Vec<usize> = names
        .iter()
        .map(|n| {
            background
                .column_index(n)
                .ok_or_else(|| ImportanceError::MismatchedFeatures(format!("{n} missing from background")))
        })
        .collect::<Result<_, _>>()?;

    let k = model.n_classes();
    let blocks = 1usize << d;
    let b = background.n_rows();
    let weights: Vec<f64> = (0..d.max(1))
        .map(|s| factorial(s) * factorial(d.saturating_sub(s + 1)) / factorial(d))
        .collect();

    let per_row: Vec<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> = (0..data.n_rows())
        .into_par_iter()
        .map(|row| -> Result<_, ImportanceError> {
            let stacked: Vec<usize> = (0..blocks).flat_map(|_| 0..b).collect();
            let mut columns = Vec::with_capacity(background.column_names().len());
            for (ci, name) in background.column_names().iter().enumerate() {
                let col = match bg_index.iter().position(|&g| g == ci) {
                    Some(f) => hybrid_column(
                        data.column(features[f]),
                        row,
                        background.column(ci),
                        f,
                        blocks,
                    )?,
                    None => background.column(ci).take(&stacked),
                };
                columns.push((name.clone(), col));
            }
            let hybrid = FeatureTable::new(
                columns,
                background.target_name(),
                background.timestamp_name(),
                vec![0; blocks * b],
            )?;
            let probs = model.predict_proba(&hybrid)?;

            let mut v = vec![vec![0.0; k]; blocks];
            for (s, vs) in v.iter_mut().enumerate() {
                for i in 0..b {
                    for (acc, p) in vs.iter_mut().zip(probs.row(s * b + i)) {
                        *acc += p;
                    }
                }
                vs.iter_mut().for_each(|x| *x /= b as f64);
            }

            let mut phi = vec![vec![0.0; k]; d];
            for (f, phi_f) in phi.iter_mut().enumerate() {
                let bit = 1usize << f;
                for s in (0..blocks).filter(|s| s & bit == 0) {
                    let w = weights[s.count_ones() as usize];
                    for (c, out) in phi_f.iter_mut().enumerate() {
                        *out += w * (v[s | bit][c] - v[s][c]);
                    }
                }
            }
            Ok((phi, v[0].clone(), v[blocks - 1].clone()))
        })
        .collect::<Result<_, _>>()?;

    let n = per_row.len() as f64;
    let mut per_feature = BTreeMap::new();
    for (f, name) in names.iter().enumerate() {
        let total: f64 = per_row
            .iter()
            .map(|(phi, _, _)| phi[f].iter().map(|x| x.abs()).sum::<f64>() / k as f64)
            .sum();
        per_feature.insert(name.clone(), total / n);
    }
    let profile = ImportanceProfile::new(ImportanceMethod::ExactShapley, "data", per_row.len(), per_feature)?;

    let mut phi = Vec::with_capacity(per_row.len());
    let mut base = Vec::with_capacity(per_row.len());
    let mut full = Vec::with_capacity(per_row.len());
    for (p, v0, vf) in per_row {
        phi.push(p);
        base.push(v0);
        full.push(vf);
    }
    Ok(ShapleyResult {
        features: names,
        classes: model.class_labels().to_vec(),
        phi,
        base,
        full,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::fit_frequency_classifier;

    #[test]
    fn weights_sum_over_coalitions() {
        // sum over s of C(d-1, s) * w(s) = 1
        let d = 5usize;
        let total: f64 = (0..d)
            .map(|s| {
                let binom = factorial(d - 1) / (factorial(s) * factorial(d - 1 - s));
                binom * factorial(s) * factorial(d - s - 1) / factorial(d)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feature_blind_model_has_zero_attribution() {
        let t = FeatureTable::new(
            vec![
                ("a".into(), Column::Categorical(CategoricalColumn::from_strings(["x", "y", "x", "z"]))),
                ("b".into(), Column::Numeric(vec![1.0, 2.0, 3.0, 4.0])),
                ("y".into(), Column::Categorical(CategoricalColumn::from_strings(["p", "q", "p", "p"]))),
            ],
            "y",
            "ts",
            vec![0; 4],
        )
        .unwrap();
        let m = fit_frequency_classifier(&t, 0).unwrap();
        let r = exact_shapley(&m, &t, &t, DEFAULT_MAX_FEATURES).unwrap();
        assert!(r.phi.iter().flatten().flatten().all(|x| x.abs() < 1e-12));
        assert_eq!(r.profile.per_feature["a"], 0.0);
        assert!(matches!(
            exact_shapley(&m, &t, &t, 1),
            Err(ImportanceError::TooManyFeatures { d: 2, max: 1 })
        ));
        assert!(matches!(
            exact_shapley(&m, &t, &t.take(&[]), 12),
            Err(ImportanceError::EmptyBackground)
        ));
    }

    #[test]
    fn background_sample_is_seeded() {
        let t = FeatureTable::new(
            vec![("y".into(), Column::Numeric((0..500).map(f64::from).collect()))],
            "y",
            "ts",
            (0..500).collect(),
        )
        .unwrap();
        let a = sample_background(&t, 100, 4);
        assert_eq!(a.n_rows(), 100);
        assert_eq!(a, sample_background(&t, 100, 4));
        assert_eq!(sample_background(&t, 1000, 4).n_rows(), 500);
    }
}
