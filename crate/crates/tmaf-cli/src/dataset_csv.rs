//! CSV import and export for regression datasets. Layout: a header row of
//! input columns followed by a final target column named `y`, then one
//! sample per row. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces the dataset bit for bit.

use crate::error::RunError;
use std::path::Path;
use tmaf_core::data::{Dataset, Targets};
use tmaf_core::la::Batch;

fn csv_err(path: &Path, detail: String) -> RunError {
    RunError::DatasetCsv {
        path: path.to_path_buf(),
        detail,
    }
}

/// Writes a single-target regression dataset with header `x1,...,xd,y`.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<(), RunError> {
    let targets = match ds.targets() {
        Targets::Values(t) if t.dim() == 1 => t,
        Targets::Values(_) => {
            return Err(csv_err(
                path,
                "only single-target regression datasets can be exported".into(),
            ))
        }
        Targets::Labels(_) => {
            return Err(csv_err(
                path,
                "classification datasets cannot be exported as CSV".into(),
            ))
        }
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e.to_string()))?;
    let d = ds.input_dim();
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header)
        .map_err(|e| csv_err(path, e.to_string()))?;
    let mut record: Vec<String> = Vec::with_capacity(d + 1);
    for s in 0..ds.n() {
        record.clear();
        for k in 0..d {
            record.push(ds.inputs().get(s, k).to_string());
        }
        record.push(targets.get(s, 0).to_string());
        w.write_record(&record)
            .map_err(|e| csv_err(path, e.to_string()))?;
    }
    w.flush().map_err(|e| csv_err(path, e.to_string()))?;
    Ok(())
}

/// Reads a regression dataset. The last header column must be named `y`;
/// the remaining columns are the inputs. Every cell must be a finite
/// number, and every row must match the header width.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset, RunError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e.to_string()))?;
    let headers = r
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(csv_err(
            path,
            format!(
                "expected at least one input column and a final y column, got {} columns",
                headers.len()
            ),
        ));
    }
    let last = headers.iter().next_back().unwrap_or("");
    if last != "y" {
        return Err(csv_err(
            path,
            format!("last header column must be named y, got {last:?}"),
        ));
    }
    let d = headers.len() - 1;
    let mut inputs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(csv_err(
                path,
                format!(
                    "row {row}: expected {} cells, got {}",
                    headers.len(),
                    record.len()
                ),
            ));
        }
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                csv_err(path, format!("row {row}: cell {:?} is not a number", cell))
            })?;
            if !v.is_finite() {
                return Err(csv_err(
                    path,
                    format!("row {row}: cell {cell:?} is not finite"),
                ));
            }
            if k < d {
                inputs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = ys.len();
    if n == 0 {
        return Err(csv_err(path, "file contains no samples".into()));
    }
    let inputs = Batch::from_vec(n, d, inputs)?;
    let targets = Batch::from_vec(n, 1, ys)?;
    Ok(Dataset::new(inputs, Targets::Values(targets))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tmaf_core::data::{sample_sine_dataset, SeededRng};

    fn temp_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = SeededRng::new(11);
        let ds = sample_sine_dataset(3, 50, &mut rng).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(f.path(), &ds).unwrap();
        let back = read_dataset_csv(f.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn header_is_inputs_then_y() {
        let mut rng = SeededRng::new(3);
        let ds = sample_sine_dataset(2, 4, &mut rng).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(f.path(), &ds).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.starts_with("x1,x2,y\n"), "{text}");
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn rejects_missing_y_column() {
        let f = temp_csv("x1,target\n0.5,1.0\n");
        let err = read_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("must be named y"), "{err}");
    }

    #[test]
    fn rejects_ragged_rows_with_row_number() {
        let f = temp_csv("x1,x2,y\n1.0,2.0,3.0\n1.0,2.0\n");
        let err = read_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("2"), "{err}");
    }

    #[test]
    fn rejects_non_numeric_and_non_finite_cells() {
        let f = temp_csv("x1,y\nabc,1.0\n");
        let err = read_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");

        let f = temp_csv("x1,y\ninf,1.0\n");
        let err = read_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("not finite"), "{err}");
    }

    #[test]
    fn rejects_empty_data() {
        let f = temp_csv("x1,y\n");
        let err = read_dataset_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("no samples"), "{err}");
    }

    #[test]
    fn missing_file_is_reported() {
        let err = read_dataset_csv(Path::new("/nonexistent/data.csv")).unwrap_err();
        assert!(matches!(err, RunError::DatasetCsv { .. }));
        assert_eq!(err.exit_code(), 2);
    }
}
