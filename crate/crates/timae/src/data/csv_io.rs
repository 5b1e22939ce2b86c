//! CSV ingestion: UTF-8, comma-separated, one header row. The first
//! column may be declared a timestamp; it is kept as opaque strings and
//! excluded from the numeric channels.

use std::path::Path;

use super::TimeSeries;
use crate::error::{Error, Result};

/// How rows containing NaN (or empty cells) are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NanPolicy {
    /// Reject the file with a parse error naming the offending cell.
    #[default]
    Reject,
    /// Replace the cell with the most recent finite value in its channel
    /// (rows before the first finite value are rejected).
    ForwardFill,
}

#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// First column holds timestamps, not data.
    pub timestamp_col: bool,
    pub nan_policy: NanPolicy,
}

/// Loads a time series from a CSV file.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Format {
                path: path.display().to_string(),
                message: "cannot open file".into(),
            },
            _ => Error::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: format!("bad header row: {e}"),
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "empty file".into(),
        });
    }
    let first_data_col = usize::from(schema.timestamp_col);
    if headers.len() <= first_data_col {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "no data columns".into(),
        });
    }
    let channels: Vec<String> = headers
        .iter()
        .skip(first_data_col)
        .map(|h| h.to_string())
        .collect();
    let m = channels.len();

    let mut values: Vec<f64> = Vec::new();
    let mut stamps: Vec<String> = Vec::new();
    let mut last_finite: Vec<Option<f64>> = vec![None; m];
    // 1-based data row numbers, matching how people count rows in files
    let mut row_no = 0usize;
    for record in reader.records() {
        row_no += 1;
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: format!("row {row_no}: {e}"),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: row_no,
                column: record.len(),
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        if schema.timestamp_col {
            stamps.push(record[0].to_string());
        }
        for (c, cell) in record.iter().skip(first_data_col).enumerate() {
            let parsed: Option<f64> = cell.trim().parse().ok();
            let v = match parsed {
                Some(v) if v.is_finite() => {
                    last_finite[c] = Some(v);
                    v
                }
                _ => match schema.nan_policy {
                    NanPolicy::ForwardFill => match last_finite[c] {
                        Some(prev) if cell.trim().is_empty() || parsed.is_some() => prev,
                        Some(prev) if cell.trim().eq_ignore_ascii_case("nan") => prev,
                        _ => {
                            return Err(Error::Parse {
                                row: row_no,
                                column: c + first_data_col + 1,
                                message: format!("non-numeric cell {cell:?} with nothing to fill from"),
                            })
                        }
                    },
                    NanPolicy::Reject => {
                        return Err(Error::Parse {
                            row: row_no,
                            column: c + first_data_col + 1,
                            message: format!("non-numeric cell {cell:?}"),
                        })
                    }
                },
            };
            values.push(v);
        }
    }
    if row_no == 0 {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    let mut ts = TimeSeries::new(values, row_no, channels)?;
    if schema.timestamp_col {
        ts = ts.with_timestamps(stamps)?;
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_numeric_csv() {
        let f = write_tmp("a,b\n1,2\n3,4\n5,6\n");
        let ts = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.channels(), 2);
        assert_eq!(ts.value(2, 1), 6.0);
        assert_eq!(ts.channel_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn timestamp_column_excluded_from_channels() {
        let f = write_tmp("date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n");
        let schema = CsvSchema {
            timestamp_col: true,
            ..Default::default()
        };
        let ts = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ts.channels(), 2);
        assert_eq!(ts.timestamps().unwrap()[1], "2020-01-02");
    }

    #[test]
    fn non_numeric_cell_cites_row() {
        let f = write_tmp("a\n1\n2\n3\n4\nabc\n");
        match load_csv(f.path(), &CsvSchema::default()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_format_error() {
        let f = write_tmp("");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Format { .. })
        ));
        let f = write_tmp("a,b\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn forward_fill_replaces_nan() {
        let f = write_tmp("a\n1\nnan\n3\n");
        let schema = CsvSchema {
            nan_policy: NanPolicy::ForwardFill,
            ..Default::default()
        };
        let ts = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ts.values(), &[1.0, 1.0, 3.0]);
        // leading NaN has nothing to fill from
        let f = write_tmp("a\nnan\n3\n");
        assert!(load_csv(f.path(), &schema).is_err());
    }
}
