use serde::{Deserialize, Serialize};

use super::{FeatureTable, TableError};

/// Exclusive time bounds dividing a table into train / validation / test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSplit {
    pub train_end: i64,
    pub val_end: i64,
}

impl TemporalSplit {
    pub fn new(train_end: i64, val_end: i64) -> Result<Self, TableError> {
        let split = Self { train_end, val_end };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<(), TableError> {
        if self.train_end < self.val_end {
            Ok(())
        } else {
            Err(TableError::InvalidSplit {
                train_end: self.train_end,
                val_end: self.val_end,
            })
        }
    }

    /// Row indices of each span, in table order.
    pub fn partition(&self, table: &FeatureTable) -> [Vec<usize>; 3] {
        let mut spans = [Vec::new(), Vec::new(), Vec::new()];
        for (row, &ts) in table.timestamps().iter().enumerate() {
            let span = if ts < self.train_end {
                0
            } else if ts < self.val_end {
                1
            } else {
                2
            };
            spans[span].push(row);
        }
        spans
    }
}

/// Partitions rows by timestamp. Empty spans yield empty tables.
pub fn apply_split(
    table: &FeatureTable,
    split: &TemporalSplit,
) -> Result<(FeatureTable, FeatureTable, FeatureTable), TableError> {
    split.validate()?;
    let [train, val, test] = split.partition(table);
    Ok((table.take(&train), table.take(&val), table.take(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{CategoricalColumn, Column};
    use proptest::prelude::*;

    fn table_with_ts(ts: Vec<i64>) -> FeatureTable {
        let labels: Vec<String> = ts.iter().map(|t| format!("r{t}")).collect();
        FeatureTable::new(
            vec![(
                "label".into(),
                Column::Categorical(CategoricalColumn::from_strings(&labels)),
            )],
            "label",
            "ts",
            ts,
        )
        .unwrap()
    }

    #[test]
    fn boundary_rows() {
        let t = table_with_ts(vec![1, 2, 3, 4]);
        let (tr, va, te) = apply_split(&t, &TemporalSplit::new(3, 4).unwrap()).unwrap();
        assert_eq!(tr.timestamps(), &[1, 2]);
        assert_eq!(va.timestamps(), &[3]);
        assert_eq!(te.timestamps(), &[4]);
    }

    #[test]
    fn degenerate_spans() {
        let t = table_with_ts(vec![1, 2, 3]);
        let (tr, va, te) = apply_split(&t, &TemporalSplit::new(10, 20).unwrap()).unwrap();
        assert_eq!(tr.n_rows(), 3);
        assert!(va.is_empty());
        assert!(te.is_empty());
    }

    #[test]
    fn unordered_bounds_rejected() {
        assert!(TemporalSplit::new(4, 4).is_err());
        let t = table_with_ts(vec![1]);
        let bad = TemporalSplit {
            train_end: 5,
            val_end: 2,
        };
        assert!(apply_split(&t, &bad).is_err());
    }

    #[test]
    fn quantile_bounds_on_1000_rows() {
        let t = table_with_ts((0..1000).collect());
        let (tr, va, te) = apply_split(&t, &TemporalSplit::new(600, 800).unwrap()).unwrap();
        // independent count
        let count = |lo: i64, hi: i64| t.timestamps().iter().filter(|&&x| x >= lo && x < hi).count();
        assert_eq!(tr.n_rows(), count(i64::MIN, 600));
        assert_eq!(va.n_rows(), count(600, 800));
        assert_eq!(te.n_rows(), count(800, i64::MAX));
        assert_eq!((tr.n_rows(), va.n_rows(), te.n_rows()), (600, 200, 200));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(ts in prop::collection::vec(-50i64..50, 0..200), a in -60i64..60, gap in 1i64..40) {
            let t = table_with_ts(ts.clone());
            let split = TemporalSplit::new(a, a + gap).unwrap();
            let parts = split.partition(&t);
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            prop_assert_eq!(all.len(), ts.len());
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), ts.len());
        }
    }
}
