//! File-based class probabilities so any external model can feed the
//! conformal layer.

use std::io::{Read, Write};

use super::{LearnerError, ProbabilityMatrix};

/// Rows whose sum is off by more than this are rejected; smaller errors are
/// renormalized away.
const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// Reads a comma-separated matrix whose header row names the classes.
pub fn load_probabilities<R: Read>(reader: R) -> Result<(Vec<String>, ProbabilityMatrix), LearnerError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let labels: Vec<String> = rdr
        .headers()
        .map_err(|e| LearnerError::External(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if labels.is_empty() || labels.iter().any(String::is_empty) {
        return Err(LearnerError::External("header must name every class".into()));
    }
    let k = labels.len();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| LearnerError::External(e.to_string()))?;
        if record.len() != k {
            return Err(LearnerError::Shape(format!(
                "row {row} has {} entries, expected {k}",
                record.len()
            )));
        }
        let mut parsed = Vec::with_capacity(k);
        for cell in record.iter() {
            let p: f64 = cell.trim().parse().map_err(|_| {
                LearnerError::External(format!("unparseable probability {cell:?} at row {row}"))
            })?;
            parsed.push(p);
        }
        let sum: f64 = parsed.iter().sum();
        if parsed.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(LearnerError::NotSimplex { row, sum });
        }
        values.extend(parsed.iter().map(|p| p / sum));
    }
    Ok((labels, ProbabilityMatrix::new(k, values)?))
}

pub fn write_probabilities<W: Write>(
    writer: W,
    labels: &[String],
    probs: &ProbabilityMatrix,
) -> Result<(), LearnerError> {
    if labels.len() != probs.n_classes() {
        return Err(LearnerError::Shape(format!(
            "{} labels for {} columns",
            labels.len(),
            probs.n_classes()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| LearnerError::External(e.to_string());
    w.write_record(labels).map_err(io)?;
    for row in probs.rows() {
        w.write_record(row.iter().map(|p| p.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| LearnerError::External(e.to_string()))?;
    Ok(())
}
