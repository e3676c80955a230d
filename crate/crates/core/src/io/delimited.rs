//! Delimited numeric text ingestion (CSV and friends).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::data::{DataMatrix, LabeledDataset};
use crate::error::{Error, Result};

/// Which column carries the integer label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

/// Loads a rectangular numeric table. Every row must have the same number of
/// cells; the optional label column is removed from the features and parsed
/// as integers. Line numbers in errors are 1-based and count the header.
pub fn load_delimited(
    path: &Path,
    delimiter: char,
    has_header: bool,
    label_column: Option<LabelColumn>,
) -> Result<LabeledDataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if idx == 0 && has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {w} cells, found {}", cells.len()),
                });
            }
            _ => {}
        }

        let label_idx = label_column.map(|lc| match lc {
            LabelColumn::Index(i) => i,
            LabelColumn::Last => cells.len().saturating_sub(1),
        });
        if let Some(li) = label_idx {
            if li >= cells.len() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("label column {li} out of range for {} cells", cells.len()),
                });
            }
        }

        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_idx {
                let label: i64 = cell.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("label cell {c} is not an integer: {cell:?}"),
                })?;
                labels.push(label);
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("cell {c} is not numeric: {cell:?}"),
                })?;
                row.push(value);
            }
        }
        rows.push(row);
    }

    let data = DataMatrix::from_rows(&rows)?;
    let labels = if label_column.is_some() {
        Some(labels)
    } else {
        None
    };
    LabeledDataset::new(data, labels)
}
