//! CSV exchange formats.
//!
//! Series files have header `t,value`, state files `t,x1,...,xN`. Values are written
//! with 17 significant digits so a write/read cycle reproduces every bit.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use qnr_core::reservoir::{Provenance, StateMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    Width {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}: time index {found}, expected {expected}")]
    TimeIndex {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: String,
    },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, column `{column}`: non-finite value `{value}`")]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
}

pub type CsvResult<T> = std::result::Result<T, CsvError>;

/// Shortest form that is guaranteed to round-trip: 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> CsvResult<std::io::BufWriter<File>> {
    let io = |source| CsvError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    File::create(path).map(std::io::BufWriter::new).map_err(io)
}

fn finish(path: &Path, mut w: std::io::BufWriter<File>) -> CsvResult<()> {
    w.flush().map_err(|source| CsvError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_series(path: &Path, values: &[f64]) -> CsvResult<()> {
    let mut w = create(path)?;
    let io = |source| CsvError::Io {
        path: path.to_owned(),
        source,
    };
    writeln!(w, "t,value").map_err(io)?;
    for (t, v) in values.iter().enumerate() {
        writeln!(w, "{t},{}", format_value(*v)).map_err(io)?;
    }
    finish(path, w)
}

pub fn write_states(path: &Path, states: &StateMatrix) -> CsvResult<()> {
    let mut w = create(path)?;
    let io = |source| CsvError::Io {
        path: path.to_owned(),
        source,
    };
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=states.n_features()).map(|k| format!("x{k}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for t in 0..states.n_steps() {
        line.clear();
        line.push_str(&t.to_string());
        for k in 0..states.n_features() {
            line.push(',');
            line.push_str(&format_value(states.get(t, k)));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    finish(path, w)
}

/// Plot-ready table with a header row; fields are quoted where needed.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CsvResult<()> {
    let csv_err = |source| CsvError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CsvError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads a `t,c1,...` file; returns the column names after `t` and the values, row-major.
/// Data rows are numbered from 1 in error messages.
fn read_table(path: &Path) -> CsvResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| CsvError::Csv {
            path: path.to_owned(),
            source,
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|source| CsvError::Csv {
            path: path.to_owned(),
            source,
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(CsvError::Header {
            path: path.to_owned(),
            expected: "t,<columns>".into(),
            found: header.join(","),
        });
    }
    let columns = header[1..].to_vec();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|source| CsvError::Csv {
            path: path.to_owned(),
            source,
        })?;
        if rec.len() != header.len() {
            return Err(CsvError::Width {
                path: path.to_owned(),
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        if rec[0].parse::<usize>().ok() != Some(i) {
            return Err(CsvError::TimeIndex {
                path: path.to_owned(),
                row,
                expected: i,
                found: rec[0].to_owned(),
            });
        }
        let mut values = Vec::with_capacity(columns.len());
        for (field, column) in rec.iter().skip(1).zip(&columns) {
            let v: f64 = field.parse().map_err(|_| CsvError::Parse {
                path: path.to_owned(),
                row,
                column: column.clone(),
                value: field.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(CsvError::NonFinite {
                    path: path.to_owned(),
                    row,
                    column: column.clone(),
                    value: field.to_owned(),
                });
            }
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CsvError::Empty {
            path: path.to_owned(),
        });
    }
    Ok((columns, rows))
}

pub fn read_series(path: &Path) -> CsvResult<Vec<f64>> {
    let (columns, rows) = read_table(path)?;
    if columns != ["value"] {
        return Err(CsvError::Header {
            path: path.to_owned(),
            expected: "t,value".into(),
            found: format!("t,{}", columns.join(",")),
        });
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_states(path: &Path) -> CsvResult<StateMatrix> {
    let (columns, rows) = read_table(path)?;
    let expected: Vec<String> = (1..=columns.len()).map(|k| format!("x{k}")).collect();
    if columns != expected {
        return Err(CsvError::Header {
            path: path.to_owned(),
            expected: format!("t,{}", expected.join(",")),
            found: format!("t,{}", columns.join(",")),
        });
    }
    Ok(StateMatrix::from_rows(&rows, Provenance::Ingested)
        .expect("rows are finite and of equal width"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_round_trips_bits() {
        for v in [0.1, -1.0 / 3.0, 1e-300, f64::MIN_POSITIVE, 5e-324, 12345.678901234567, -0.0] {
            let back: f64 = format_value(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
    }
}
