//! File ingestion: whitespace-separated edge lists and numeric CSV.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Parse an edge-list text: one edge per line as two whitespace-separated
/// 0-based node indices. Lines starting with '#' and blank lines are
/// ignored. Returns the node count (max index + 1) and the raw edges;
/// connectivity is the caller's concern (load, inspect components, then
/// build or repair).
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut edges = Vec::new();
    let mut max_index = None::<usize>;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let a = parts.next();
        let b = parts.next();
        let (a, b) = match (a, b, parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected two indices, got {line:?}",
                    lineno + 1
                )))
            }
        };
        let a: usize = a
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad index {a:?}", lineno + 1)))?;
        let b: usize = b
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad index {b:?}", lineno + 1)))?;
        max_index = Some(max_index.map_or(a.max(b), |m| m.max(a).max(b)));
        edges.push((a, b));
    }
    match max_index {
        Some(m) => Ok((m + 1, edges)),
        None => Err(Error::Parse("edge list is empty".into())),
    }
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<(usize, Vec<(usize, usize)>)> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// Parse a headerless numeric CSV into an n x d matrix; `has_header` skips
/// the first row.
pub fn parse_csv_matrix(text: &str, has_header: bool) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("csv row {}: {e}", i + 1)))?;
        let row: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("csv row {}: bad number {f:?}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "csv row {}: {} columns, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("csv is empty".into()));
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len() / d;
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Parse(format!("csv shape: {e}")))
}

pub fn read_csv_matrix(path: impl AsRef<Path>, has_header: bool) -> Result<Array2<f64>> {
    parse_csv_matrix(&std::fs::read_to_string(path)?, has_header)
}

/// Parse a one-column CSV of integer class labels; -1 marks an unlabeled
/// sample.
pub fn parse_labels_csv(text: &str, has_header: bool) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if has_header && i == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| Error::Parse(format!("labels row {}: bad label {line:?}", i + 1)))?;
        if v < -1 {
            return Err(Error::Parse(format!(
                "labels row {}: labels are class indices or -1, got {v}",
                i + 1
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse("labels csv is empty".into()));
    }
    Ok(out)
}

pub fn read_labels_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<i64>> {
    parse_labels_csv(&std::fs::read_to_string(path)?, has_header)
}
