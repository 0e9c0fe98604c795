use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{half_split, model_labels, select, HarnessError, ModelFactory};
use crate::conformal::{aci_run, aps_coverage, calibrate_aps};
use crate::tabular::{apply_split, FeatureTable, TemporalSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AciRow {
    /// `STATIC` or `ACI`.
    pub method: String,
    pub gamma: Option<f64>,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub n_eval: usize,
    /// Miscoverage level used at the last step (ACI rows only).
    pub final_alpha: Option<f64>,
}

/// Static APS and one ACI run per gamma, sharing one fitted model and one
/// calibration, scored over the test span in timestamp order.
pub fn compare_aci<F: ModelFactory + ?Sized>(
    table: &FeatureTable,
    split: &TemporalSplit,
    factory: &F,
    alpha: f64,
    gammas: &[f64],
    seed: u64,
) -> Result<Vec<AciRow>, HarnessError> {
    if gammas.is_empty() {
        return Err(HarnessError::InvalidConfig("gamma list is empty".into()));
    }
    let (train, val, test) = apply_split(table, split)?;
    for (name, t) in [("train", &train), ("validation", &val), ("test", &test)] {
        if t.is_empty() {
            return Err(HarnessError::EmptySplit(name));
        }
    }
    let model = factory.fit(&train, seed)?;
    let val_probs = model.predict_proba(&val)?;
    let val_labels = model_labels(model.as_ref(), &val)?;
    let (cal, _) = half_split(val.n_rows(), seed);
    if cal.is_empty() {
        return Err(HarnessError::EmptySplit("calibration half"));
    }
    let calib = calibrate_aps(&val_probs.select(&cal), &select(&val_labels, &cal), alpha)?;

    let mut order: Vec<usize> = (0..test.n_rows()).collect();
    order.sort_by_key(|&r| test.timestamps()[r]);
    let stream = test.take(&order);
    let probs = model.predict_proba(&stream)?;
    let labels = model_labels(model.as_ref(), &stream)?;

    let fixed = aps_coverage(&probs, &labels, calib.threshold)?;
    let mut rows = vec![AciRow {
        method: "STATIC".into(),
        gamma: None,
        coverage: fixed.empirical_coverage,
        mean_set_size: fixed.mean_set_size,
        n_eval: fixed.n_eval,
        final_alpha: None,
    }];
    let adaptive: Vec<AciRow> = gammas
        .par_iter()
        .map(|&gamma| -> Result<AciRow, HarnessError> {
            let out = aci_run(&probs, &labels, alpha, gamma, &calib)?;
            Ok(AciRow {
                method: "ACI".into(),
                gamma: Some(gamma),
                coverage: out.report.empirical_coverage,
                mean_set_size: out.report.mean_set_size,
                n_eval: out.report.n_eval,
                final_alpha: out.alpha_trace.last().copied(),
            })
        })
        .collect::<Result<_, _>>()?;
    rows.extend(adaptive);
    Ok(rows)
}
