//! Plain-text vector and matrix files.
//!
//! Vectors are one value per line; matrices are one comma-separated row per
//! line. Values are written with 17 significant digits so that reading a
//! file back reproduces every `f64` bit for bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Formats `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_vector(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(values.len() * 24);
    for &v in values {
        out.push_str(&fmt_f64(v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_value(path: &Path, line: usize, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("not a number: {:?}", text.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: "value is not finite".into(),
        });
    }
    Ok(v)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_value(path, i + 1, l))
        .collect()
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| parse_value(path, i + 1, cell))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "empty matrix file".into(),
        });
    }
    DenseMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn vectors_round_trip_exactly(values in proptest::collection::vec(-1e300f64..1e300, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("v.csv");
            write_vector(&path, &values).unwrap();
            prop_assert_eq!(read_vector(&path).unwrap(), values);
        }
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DenseMatrix::new(2, 3, vec![0.1, -2.0 / 3.0, 1e-300, 5.0, 6.02e23, -0.0]).unwrap();
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file_carries_path() {
        let err = read_vector("/nonexistent/x.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
