use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Raw numeric table: feature rows, labels and the feature column names.
#[derive(Debug, Clone)]
pub struct Table {
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub columns: Vec<String>,
}

/// Parses a headed numeric CSV, splitting off `label_column`.
pub fn read_table(path: &Path, label_column: &str) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            column: String::new(),
            message: format!("{other:?}"),
        },
    })?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_at = headers.iter().position(|h| h == label_column).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 1,
        column: label_column.to_string(),
        message: "label column not found in header".into(),
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = k + 2;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: headers[j].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if j == label_at {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
        rows.push(values);
    }
    let d = headers.len() - 1;
    if rows.is_empty() || d == 0 {
        return Err(Error::InvalidDataset(format!(
            "{} has {} rows and {d} feature columns",
            path.display(),
            rows.len()
        )));
    }
    let mut columns = headers;
    columns.remove(label_at);
    Ok(Table {
        features: DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]),
        labels: DVector::from_vec(labels),
        columns,
    })
}

/// Maps a two-valued label vector to `{−1, +1}` (smaller value to −1).
/// Other label sets are returned unchanged.
pub fn binary_labels(y: &DVector<f64>) -> DVector<f64> {
    let mut values: Vec<f64> = y.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    match values[..] {
        [lo, _hi] => y.map(|v| if v == lo { -1.0 } else { 1.0 }),
        _ => y.clone(),
    }
}

/// Reads a CSV into one dataset: labels mapped to `±1` when binary, no
/// standardization, bias appended when `bias` is set.
pub fn read_csv_dataset(path: &Path, label_column: &str, bias: bool) -> Result<Dataset> {
    let table = read_table(path, label_column)?;
    let data = Dataset::new(table.features, binary_labels(&table.labels))?;
    Ok(if bias { data.with_bias() } else { data })
}

/// Seeded shuffle and split, standardization by train statistics, bias
/// column, `±1` labels for binary targets.
pub fn load_csv(path: &Path, label_column: &str, split_ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let table = read_table(path, label_column)?;
    let labels = binary_labels(&table.labels);
    split_standardize(&table.features, &labels, split_ratio, seed)
}

pub(crate) fn split_indices(n: usize, split_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0, 1), got {split_ratio}")));
    }
    if n < 2 {
        return Err(Error::InvalidDataset(format!("need at least 2 rows to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((split_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub(crate) fn split_standardize(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    split_ratio: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(x.nrows(), split_ratio, seed)?;
    let xtr = x.select_rows(&train);
    let means: Vec<f64> = (0..x.ncols()).map(|j| xtr.column(j).mean()).collect();
    let stds: Vec<f64> = (0..x.ncols())
        .map(|j| {
            let s = xtr.column(j).map(|v| (v - means[j]).powi(2)).mean().sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let scale = |rows: &[usize]| DMatrix::from_fn(rows.len(), x.ncols(), |i, j| (x[(rows[i], j)] - means[j]) / stds[j]);
    let train_set = Dataset::new(scale(&train), y.select_rows(&train))?.with_bias();
    let test_set = Dataset::new(scale(&test), y.select_rows(&test))?.with_bias();
    Ok((train_set, test_set))
}
