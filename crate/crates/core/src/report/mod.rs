//! Line-oriented JSON records, comma-separated summary tables, and the
//! string sentinels used for non-finite numbers in both.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Serializes non-finite floats as strings: `INF`, `-INF`, and
/// `NOT_APPLICABLE` for NaN. Finite values stay numbers.
pub mod sentinel {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub const INF: &str = "INF";
    pub const NEG_INF: &str = "-INF";
    pub const NOT_APPLICABLE: &str = "NOT_APPLICABLE";

    pub fn label(v: f64) -> String {
        if v.is_nan() {
            NOT_APPLICABLE.to_string()
        } else if v == f64::INFINITY {
            INF.to_string()
        } else if v == f64::NEG_INFINITY {
            NEG_INF.to_string()
        } else {
            v.to_string()
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&label(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                INF => Ok(f64::INFINITY),
                NEG_INF => Ok(f64::NEG_INFINITY),
                NOT_APPLICABLE => Ok(f64::NAN),
                other => other.parse().map_err(de::Error::custom),
            },
        }
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<(), ReportError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of pre-formatted cells.
pub fn write_csv_table<W: Write>(
    w: W,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}
