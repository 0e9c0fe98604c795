use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ImportanceError, ImportanceProfile};
use crate::report::sentinel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRow {
    pub feature: String,
    pub before: f64,
    pub after: f64,
    /// after / before; infinite when `before` is zero.
    #[serde(with = "sentinel")]
    pub ratio: f64,
    /// 1-based, by descending importance with ties by name.
    pub rank_before: usize,
    pub rank_after: usize,
    pub rank_change: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    /// Ordered by `rank_before`.
    pub rows: Vec<DynamicsRow>,
    /// Mean rank change over the five features ranked highest before.
    pub mean_top5_rank_change: f64,
}

impl DynamicsReport {
    /// Mean rank change over the `k` features ranked highest before.
    pub fn mean_rank_change_top(&self, k: usize) -> f64 {
        let top = &self.rows[..k.min(self.rows.len())];
        if top.is_empty() {
            return 0.0;
        }
        top.iter().map(|r| r.rank_change as f64).sum::<f64>() / top.len() as f64
    }
}

fn ranks(p: &ImportanceProfile) -> BTreeMap<&str, usize> {
    p.ranked().into_iter().enumerate().map(|(i, (k, _))| (k, i + 1)).collect()
}

pub fn importance_dynamics(
    before: &ImportanceProfile,
    after: &ImportanceProfile,
) -> Result<DynamicsReport, ImportanceError> {
    if before.method != after.method {
        return Err(ImportanceError::MismatchedMethod);
    }
    if !before.per_feature.keys().eq(after.per_feature.keys()) {
        return Err(ImportanceError::MismatchedFeatures(
            "before and after profiles cover different features".into(),
        ));
    }
    let rb = ranks(before);
    let ra = ranks(after);
    let rows: Vec<DynamicsRow> = before
        .ranked()
        .into_iter()
        .map(|(name, b)| {
            let a = after.per_feature[name];
            let (rank_before, rank_after) = (rb[name], ra[name]);
            DynamicsRow {
                feature: name.to_string(),
                before: b,
                after: a,
                ratio: if b == 0.0 { f64::INFINITY } else { a / b },
                rank_before,
                rank_after,
                rank_change: rank_before.abs_diff(rank_after),
            }
        })
        .collect();
    let mut report = DynamicsReport {
        rows,
        mean_top5_rank_change: 0.0,
    };
    report.mean_top5_rank_change = report.mean_rank_change_top(5);
    Ok(report)
}
