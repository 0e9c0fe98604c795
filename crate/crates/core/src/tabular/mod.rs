//! Tabular data model, CSV ingestion, temporal splits and synthetic shift
//! scenarios.

mod scenario;
mod split;
mod table;

pub use scenario::{
    generate_scenario, id_class, ConcentrationMode, EntropyLevel, PeriodLayout, ShiftScenario,
};
pub use split::{apply_split, TemporalSplit};
pub use table::{load_table, CategoricalColumn, Column, FeatureTable, Schema, Task, MISSING};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("missing declared column: {0}")]
    MissingColumn(String),
    #[error("duplicate column: {0}")]
    DuplicateColumn(String),
    #[error("unparseable timestamp {value:?} at row {row}")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("unparseable number {value:?} in column {column} at row {row}")]
    UnparseableNumber {
        column: String,
        row: usize,
        value: String,
    },
    #[error("empty target cell at row {row}")]
    MissingTarget { row: usize },
    #[error("table has zero rows")]
    Empty,
    #[error("column {column} has {found} rows, expected {expected}")]
    RaggedColumn {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("code {code} out of range for {n_levels} levels")]
    InvalidCode { code: u32, n_levels: usize },
    #[error("target column is not categorical")]
    TargetNotCategorical,
    #[error("target column is not numeric")]
    TargetNotNumeric,
    #[error("split bounds out of order: train_end {train_end} must be < val_end {val_end}")]
    InvalidSplit { train_end: i64, val_end: i64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
