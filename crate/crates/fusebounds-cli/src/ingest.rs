//! CSV ingestion: header `x1..xp, r, y, z`, one row per observation, with
//! the missing outcome left empty.

use fusebounds::dataset::{DatasetError, FusedDataset, FusedRow, Outcome};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {reason}")]
    Schema { reason: String },
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Read and validate a fused dataset. Expected header: `x1..xp, r, y, z`
/// in order; `r` is 0 or 1; `y` is empty exactly when `r = 0` and `z` empty
/// exactly when `r = 1`. Line numbers in errors are 1-based file lines.
pub fn ingest_csv(path: &Path) -> Result<FusedDataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => IngestError::Schema { reason: e.to_string() },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| IngestError::Schema { reason: e.to_string() })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 4 {
        return Err(IngestError::Schema {
            reason: format!("expected at least 4 columns (x1, r, y, z), got {}", cols.len()),
        });
    }
    let p_x = cols.len() - 3;
    for (j, col) in cols.iter().take(p_x).enumerate() {
        let want = format!("x{}", j + 1);
        if *col != want {
            return Err(IngestError::Schema {
                reason: format!("column {} must be named {want}, found {col}", j + 1),
            });
        }
    }
    for (offset, want) in ["r", "y", "z"].iter().enumerate() {
        let found = cols[p_x + offset];
        if found != *want {
            return Err(IngestError::Schema {
                reason: format!("column {} must be named {want}, found {found}", p_x + offset + 1),
            });
        }
    }

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header occupies line 1
        let record = record.map_err(|e| IngestError::Row { line, reason: e.to_string() })?;
        if record.len() != cols.len() {
            return Err(IngestError::Row {
                line,
                reason: format!("expected {} fields, found {}", cols.len(), record.len()),
            });
        }
        let mut x = Vec::with_capacity(p_x);
        for j in 0..p_x {
            let field = &record[j];
            let value: f64 = field.parse().map_err(|_| IngestError::Row {
                line,
                reason: format!("x{} is not a number: {field:?}", j + 1),
            })?;
            if !value.is_finite() {
                return Err(IngestError::Row {
                    line,
                    reason: format!("x{} is not finite", j + 1),
                });
            }
            x.push(value);
        }
        let r = match &record[p_x] {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::Row {
                    line,
                    reason: format!("r must be 0 or 1, found {other:?}"),
                })
            }
        };
        let y_field = &record[p_x + 1];
        let z_field = &record[p_x + 2];
        let outcome = if r {
            if !z_field.is_empty() {
                return Err(IngestError::Row {
                    line,
                    reason: "z must be empty when r = 1".to_string(),
                });
            }
            if y_field.is_empty() {
                return Err(IngestError::Row {
                    line,
                    reason: "y must be present when r = 1".to_string(),
                });
            }
            let y: f64 = y_field.parse().map_err(|_| IngestError::Row {
                line,
                reason: format!("y is not a number: {y_field:?}"),
            })?;
            Outcome::Y(vec![y])
        } else {
            if !y_field.is_empty() {
                return Err(IngestError::Row {
                    line,
                    reason: "y must be empty when r = 0".to_string(),
                });
            }
            if z_field.is_empty() {
                return Err(IngestError::Row {
                    line,
                    reason: "z must be present when r = 0".to_string(),
                });
            }
            let z: f64 = z_field.parse().map_err(|_| IngestError::Row {
                line,
                reason: format!("z is not a number: {z_field:?}"),
            })?;
            Outcome::Z(vec![z])
        };
        rows.push(FusedRow { x, outcome });
    }

    let data = FusedDataset::new(p_x, rows)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn reads_well_formed_file() {
        let file = write_temp("x1,x2,r,y,z\n0.1,0.2,1,3.5,\n0.3,0.4,0,,2.5\n1,0,1,1.0,\n0,1,0,,0.5\n");
        let data = ingest_csv(file.path()).unwrap();
        assert_eq!(data.n(), 4);
        assert_eq!(data.p_x(), 2);
        assert_eq!(data.n_y_arm(), 2);
    }

    #[test]
    fn rejects_outcome_on_wrong_arm() {
        let file = write_temp("x1,r,y,z\n0.1,1,3.5,9.9\n0.3,0,,2.5\n");
        match ingest_csv(file.path()) {
            Err(IngestError::Row { line: 2, reason }) => {
                assert!(reason.contains("z must be empty"), "{reason}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_single_arm_file() {
        let file = write_temp("x1,r,y,z\n0.1,1,3.5,\n0.3,1,2.5,\n");
        assert!(matches!(
            ingest_csv(file.path()),
            Err(IngestError::Dataset(DatasetError::EmptyArm { .. }))
        ));
    }

    #[test]
    fn rejects_misnamed_columns() {
        let file = write_temp("a,r,y,z\n0.1,1,3.5,\n");
        assert!(matches!(ingest_csv(file.path()), Err(IngestError::Schema { .. })));
    }
}
