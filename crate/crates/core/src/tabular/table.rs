use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TableError;

/// Reserved code for an empty categorical cell.
pub const MISSING: u32 = u32::MAX;

/// Interned categorical column. Codes are dense per column, assigned in
/// first-seen order; sub-tables produced by splits share the level list so
/// codes stay comparable across spans.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    codes: Vec<u32>,
    levels: Arc<Vec<String>>,
}

impl CategoricalColumn {
    /// Interns raw strings. Empty strings become [`MISSING`].
    pub fn from_strings<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut levels = Vec::new();
        let codes = values
            .into_iter()
            .map(|v| {
                let v = v.as_ref();
                if v.is_empty() {
                    return MISSING;
                }
                if let Some(&c) = index.get(v) {
                    return c;
                }
                let c = levels.len() as u32;
                levels.push(v.to_string());
                index.insert(v.to_string(), c);
                c
            })
            .collect();
        Self {
            codes,
            levels: Arc::new(levels),
        }
    }

    /// Builds a column from pre-assigned codes. Every non-missing code must
    /// index into `levels`.
    pub fn from_parts(codes: Vec<u32>, levels: Arc<Vec<String>>) -> Result<Self, TableError> {
        if let Some(&bad) = codes
            .iter()
            .find(|&&c| c != MISSING && c as usize >= levels.len())
        {
            return Err(TableError::InvalidCode {
                code: bad,
                n_levels: levels.len(),
            });
        }
        Ok(Self { codes, levels })
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn shared_levels(&self) -> Arc<Vec<String>> {
        Arc::clone(&self.levels)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// The string at `row`, or `None` for a missing cell.
    pub fn value(&self, row: usize) -> Option<&str> {
        match self.codes[row] {
            MISSING => None,
            c => Some(&self.levels[c as usize]),
        }
    }

    pub fn code_of(&self, value: &str) -> Option<u32> {
        self.levels
            .iter()
            .position(|l| l == value)
            .map(|p| p as u32)
    }

    fn take(&self, rows: &[usize]) -> Self {
        Self {
            codes: rows.iter().map(|&r| self.codes[r]).collect(),
            levels: Arc::clone(&self.levels),
        }
    }
}

/// A single table column. Numeric columns use `NaN` for missing cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical(CategoricalColumn),
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(c) => c.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match self {
            Column::Categorical(c) => Some(c),
            Column::Numeric(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Categorical(c) => Column::Categorical(c.take(rows)),
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    fn cell_string(&self, row: usize) -> String {
        match self {
            Column::Categorical(c) => c.value(row).unwrap_or("").to_string(),
            Column::Numeric(v) if v[row].is_nan() => String::new(),
            Column::Numeric(v) => format!("{}", v[row]),
        }
    }
}

/// Whether the target is a class label or a real value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

/// Column-role declaration for [`load_table`].
///
/// Feature columns are categorical unless listed in `numeric`. The target is
/// categorical for classification and numeric for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub timestamp: String,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
}

impl Schema {
    pub fn new(target: impl Into<String>, timestamp: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            timestamp: timestamp.into(),
            task: Task::Classification,
            numeric: Vec::new(),
            ignore: Vec::new(),
        }
    }
}

/// Columnar tabular data with one timestamp column and one designated target.
///
/// Immutable after construction. Row order is the order of ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Column>,
    timestamp_name: String,
    timestamps: Vec<i64>,
    target: usize,
}

impl FeatureTable {
    /// `columns` holds features and the target; `target` names one of them.
    pub fn new(
        columns: Vec<(String, Column)>,
        target: &str,
        timestamp_name: impl Into<String>,
        timestamps: Vec<i64>,
    ) -> Result<Self, TableError> {
        let n_rows = timestamps.len();
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n_rows {
                return Err(TableError::RaggedColumn {
                    column: name,
                    expected: n_rows,
                    found: col.len(),
                });
            }
            if names.contains(&name) {
                return Err(TableError::DuplicateColumn(name));
            }
            names.push(name);
            cols.push(col);
        }
        let target = names
            .iter()
            .position(|n| n == target)
            .ok_or_else(|| TableError::MissingColumn(target.to_string()))?;
        Ok(Self {
            names,
            columns: cols,
            timestamp_name: timestamp_name.into(),
            timestamps,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn timestamp_name(&self) -> &str {
        &self.timestamp_name
    }

    /// All column names, target included, in declaration order.
    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn target_name(&self) -> &str {
        &self.names[self.target]
    }

    pub fn target(&self) -> &Column {
        &self.columns[self.target]
    }

    /// Class codes of a categorical target.
    pub fn class_codes(&self) -> Result<&[u32], TableError> {
        self.target()
            .as_categorical()
            .map(|c| c.codes())
            .ok_or(TableError::TargetNotCategorical)
    }

    /// Class label strings of a categorical target, indexed by code.
    pub fn class_labels(&self) -> Result<&[String], TableError> {
        self.target()
            .as_categorical()
            .map(|c| c.levels())
            .ok_or(TableError::TargetNotCategorical)
    }

    pub fn numeric_target(&self) -> Result<&[f64], TableError> {
        self.target()
            .as_numeric()
            .ok_or(TableError::TargetNotNumeric)
    }

    /// Indices (into [`Self::column`]) of every non-target column.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| i != self.target).collect()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.feature_indices()
            .into_iter()
            .map(|i| self.names[i].as_str())
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    /// New table holding the given rows, in the given order.
    pub fn take(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            timestamp_name: self.timestamp_name.clone(),
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            target: self.target,
        }
    }

    /// Copy of the table with column `index` swapped out.
    pub fn with_column(&self, index: usize, column: Column) -> Result<FeatureTable, TableError> {
        if column.len() != self.n_rows() {
            return Err(TableError::RaggedColumn {
                column: self.names[index].clone(),
                expected: self.n_rows(),
                found: column.len(),
            });
        }
        let mut out = self.clone();
        out.columns[index] = column;
        Ok(out)
    }

    /// Writes the table as comma-separated values, timestamp column first.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.timestamp_name.as_str()];
        header.extend(self.names.iter().map(String::as_str));
        w.write_record(&header)?;
        for row in 0..self.n_rows() {
            let mut record = vec![self.timestamps[row].to_string()];
            record.extend(self.columns.iter().map(|c| c.cell_string(row)));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Reads a header-first, comma-separated UTF-8 file.
///
/// Columns named in `schema.ignore` are dropped. Empty categorical cells map
/// to [`MISSING`]; empty numeric cells map to `NaN`. A classification target
/// may not contain empty cells.
pub fn load_table(path: &Path, schema: &Schema) -> Result<FeatureTable, TableError> {
    if !path.is_file() {
        return Err(TableError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    };
    let ts_idx = find(&schema.timestamp)?;
    find(&schema.target)?;
    for name in &schema.numeric {
        find(name)?;
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        for (i, cell) in record.iter().enumerate().take(headers.len()) {
            raw[i].push(cell.trim().to_string());
        }
    }
    let n_rows = raw[ts_idx].len();
    if n_rows == 0 {
        return Err(TableError::Empty);
    }

    let timestamps = raw[ts_idx]
        .iter()
        .enumerate()
        .map(|(row, v)| {
            v.parse::<i64>().map_err(|_| TableError::UnparseableTimestamp {
                row,
                value: v.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut columns = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if i == ts_idx || schema.ignore.contains(name) {
            continue;
        }
        let is_target = *name == schema.target;
        let numeric = if is_target {
            schema.task == Task::Regression
        } else {
            schema.numeric.contains(name)
        };
        let cells = std::mem::take(&mut raw[i]);
        let column = if numeric {
            let values = cells
                .iter()
                .enumerate()
                .map(|(row, v)| {
                    if v.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        v.parse::<f64>().map_err(|_| TableError::UnparseableNumber {
                            column: name.clone(),
                            row,
                            value: v.clone(),
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if is_target {
                if let Some(row) = values.iter().position(|v| v.is_nan()) {
                    return Err(TableError::MissingTarget { row });
                }
            }
            Column::Numeric(values)
        } else {
            if is_target {
                if let Some(row) = cells.iter().position(String::is_empty) {
                    return Err(TableError::MissingTarget { row });
                }
            }
            Column::Categorical(CategoricalColumn::from_strings(&cells))
        };
        columns.push((name.clone(), column));
    }
    FeatureTable::new(columns, &schema.target, schema.timestamp.clone(), timestamps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = write_file("ts,prod,label\n1,a,x\n2,b,y\n3,a,x\n");
        let t = load_table(f.path(), &Schema::new("label", "ts")).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.target_name(), "label");
        assert_eq!(t.feature_names(), vec!["prod"]);
        assert_eq!(t.timestamps(), &[1, 2, 3]);
        let prod = t.column_by_name("prod").unwrap().as_categorical().unwrap();
        assert_eq!(prod.codes(), &[0, 1, 0]);
    }

    #[test]
    fn missing_target_column() {
        let f = write_file("ts,prod\n1,a\n");
        let err = load_table(f.path(), &Schema::new("label", "ts")).unwrap_err();
        assert!(matches!(err, TableError::MissingColumn(c) if c == "label"));
    }

    #[test]
    fn empty_categorical_cell_is_missing() {
        let f = write_file("ts,prod,label\n1,,x\n2,b,y\n");
        let t = load_table(f.path(), &Schema::new("label", "ts")).unwrap();
        assert_eq!(t.n_rows(), 2);
        let prod = t.column_by_name("prod").unwrap().as_categorical().unwrap();
        assert_eq!(prod.codes()[0], MISSING);
        assert_eq!(prod.value(0), None);
        assert_eq!(prod.value(1), Some("b"));
    }

    #[test]
    fn load_errors() {
        let missing = Path::new("/definitely/not/here.csv");
        assert!(matches!(
            load_table(missing, &Schema::new("l", "ts")),
            Err(TableError::MissingFile(_))
        ));
        let f = write_file("ts,label\nmonday,x\n");
        assert!(matches!(
            load_table(f.path(), &Schema::new("label", "ts")),
            Err(TableError::UnparseableTimestamp { row: 0, .. })
        ));
        let f = write_file("ts,label\n");
        assert!(matches!(
            load_table(f.path(), &Schema::new("label", "ts")),
            Err(TableError::Empty)
        ));
    }

    #[test]
    fn numeric_columns_and_regression_target() {
        let f = write_file("ts,g,x,y\n0,a,1.5,10\n1,b,,20\n");
        let mut schema = Schema::new("y", "ts");
        schema.task = Task::Regression;
        schema.numeric = vec!["x".into()];
        let t = load_table(f.path(), &schema).unwrap();
        let x = t.column_by_name("x").unwrap().as_numeric().unwrap();
        assert_eq!(x[0], 1.5);
        assert!(x[1].is_nan());
        assert_eq!(t.numeric_target().unwrap(), &[10.0, 20.0]);
    }

    #[test]
    fn csv_round_trip() {
        let f = write_file("ts,prod,label\n1,a,x\n2,,y\n");
        let t = load_table(f.path(), &Schema::new("label", "ts")).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ts,prod,label\n1,a,x\n2,,y\n");
    }
}
