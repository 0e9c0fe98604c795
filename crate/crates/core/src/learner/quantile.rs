use std::collections::BTreeMap;

use super::{LearnerError, QuantileModel};
use crate::stats::quantile_type7;
use crate::tabular::{Column, FeatureTable};

/// Groups with fewer training rows than this use the global quantiles.
pub const MIN_GROUP_ROWS: usize = 5;

/// Per-group empirical lower/upper quantiles of a numeric target.
#[derive(Debug, Clone)]
pub struct GroupedQuantiles {
    levels: (f64, f64),
    group_feature: String,
    groups: BTreeMap<String, (f64, f64)>,
    global: (f64, f64),
}

impl GroupedQuantiles {
    pub fn global(&self) -> (f64, f64) {
        self.global
    }

    pub fn group(&self, value: &str) -> Option<(f64, f64)> {
        self.groups.get(value).copied()
    }
}

fn pair(values: &mut [f64], (lo, hi): (f64, f64)) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let a = quantile_type7(values, lo);
    let b = quantile_type7(values, hi);
    (a.min(b), a.max(b))
}

/// The seed is accepted for interface symmetry; the estimator is
/// deterministic.
pub fn fit_grouped_quantiles(
    train: &FeatureTable,
    levels: (f64, f64),
    group_feature: &str,
    _seed: u64,
) -> Result<GroupedQuantiles, LearnerError> {
    let (lo, hi) = levels;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(LearnerError::InvalidConfig(format!(
            "quantile levels must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
        )));
    }
    let target = train.numeric_target()?;
    if train.is_empty() {
        return Err(LearnerError::EmptyTrain);
    }
    let groups_col = match train.column_by_name(group_feature) {
        Some(Column::Categorical(c)) => c,
        _ => return Err(LearnerError::MissingFeature(group_feature.to_string())),
    };

    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (row, &y) in target.iter().enumerate() {
        if let Some(g) = groups_col.value(row) {
            by_group.entry(g.to_string()).or_default().push(y);
        }
    }
    let groups = by_group
        .into_iter()
        .filter(|(_, v)| v.len() >= MIN_GROUP_ROWS)
        .map(|(g, mut v)| (g, pair(&mut v, levels)))
        .collect();
    let global = pair(&mut target.to_vec(), levels);

    Ok(GroupedQuantiles {
        levels,
        group_feature: group_feature.to_string(),
        groups,
        global,
    })
}

impl QuantileModel for GroupedQuantiles {
    fn levels(&self) -> (f64, f64) {
        self.levels
    }

    fn predict(&self, rows: &FeatureTable) -> Result<Vec<(f64, f64)>, LearnerError> {
        let col = match rows.column_by_name(&self.group_feature) {
            Some(Column::Categorical(c)) => c,
            _ => return Err(LearnerError::MissingFeature(self.group_feature.clone())),
        };
        Ok((0..rows.n_rows())
            .map(|r| {
                col.value(r)
                    .and_then(|g| self.groups.get(g).copied())
                    .unwrap_or(self.global)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::CategoricalColumn;

    fn table(groups: &[&str], y: Vec<f64>) -> FeatureTable {
        FeatureTable::new(
            vec![
                (
                    "g".into(),
                    Column::Categorical(CategoricalColumn::from_strings(groups)),
                ),
                ("y".into(), Column::Numeric(y)),
            ],
            "y",
            "ts",
            vec![0; groups.len()],
        )
        .unwrap()
    }

    #[test]
    fn per_group_linear_interpolation() {
        let mut groups = vec!["g"; 100];
        groups.extend(["h"; 3]);
        let mut y: Vec<f64> = (1..=100).map(f64::from).collect();
        y.extend([1000.0, 1000.0, 1000.0]);
        let t = table(&groups, y);
        let m = fit_grouped_quantiles(&t, (0.05, 0.95), "g", 0).unwrap();
        let (lo, hi) = m.group("g").unwrap();
        assert!((lo - 5.95).abs() < 1e-12);
        assert!((hi - 95.05).abs() < 1e-12);
        // "h" is too small and falls back to the global pair
        assert!(m.group("h").is_none());

        let probe = table(&["h", "unseen", "g"], vec![0.0; 3]);
        let p = m.predict(&probe).unwrap();
        assert_eq!(p[0], m.global());
        assert_eq!(p[1], m.global());
        assert_eq!(p[2], (lo, hi));
    }

    #[test]
    fn constant_target_collapses() {
        let t = table(&["a"; 10], vec![3.0; 10]);
        let m = fit_grouped_quantiles(&t, (0.5 - 1e-9, 0.5), "g", 0).unwrap();
        assert_eq!(m.predict(&t).unwrap()[0], (3.0, 3.0));
    }

    #[test]
    fn errors() {
        let t = table(&["a"; 10], vec![3.0; 10]);
        assert!(fit_grouped_quantiles(&t, (0.9, 0.1), "g", 0).is_err());
        assert!(fit_grouped_quantiles(&t, (0.0, 0.5), "g", 0).is_err());
        assert!(fit_grouped_quantiles(&t, (0.1, 0.9), "nope", 0).is_err());
        let cat_target = FeatureTable::new(
            vec![
                (
                    "g".into(),
                    Column::Categorical(CategoricalColumn::from_strings(["a"])),
                ),
                (
                    "y".into(),
                    Column::Categorical(CategoricalColumn::from_strings(["b"])),
                ),
            ],
            "y",
            "ts",
            vec![0],
        )
        .unwrap();
        assert!(matches!(
            fit_grouped_quantiles(&cat_target, (0.1, 0.9), "g", 0),
            Err(LearnerError::Table(_))
        ));
    }
}
