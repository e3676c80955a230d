//! Input data containers.

use crate::error::{Error, Result};

/// Dense matrix of `n` input points with `d_in` features each, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d_in: usize,
}

impl DataMatrix {
    /// Builds a matrix from a flat row-major buffer, validating shape and
    /// finiteness. Requires `n >= 2` and `d_in >= 1`.
    pub fn new(values: Vec<f64>, n: usize, d_in: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 points, got {n}")));
        }
        if d_in < 1 {
            return Err(Error::Data("need at least 1 feature".into()));
        }
        if values.len() != n * d_in {
            return Err(Error::Data(format!(
                "buffer length {} does not match {n} x {d_in}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at point {}, column {}",
                pos / d_in,
                pos % d_in
            )));
        }
        Ok(Self { values, n, d_in })
    }

    /// Builds a matrix from per-point rows, which must all have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d_in = rows.first().map_or(0, |r| r.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d_in {
                return Err(Error::Data(format!(
                    "row {i} has {} features, expected {d_in}",
                    row.len()
                )));
            }
        }
        let mut values = Vec::with_capacity(n * d_in);
        for row in rows {
            values.extend_from_slice(row);
        }
        Self::new(values, n, d_in)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d_in..(i + 1) * self.d_in]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A data matrix plus optional integer labels (one per point).
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Option<Vec<i64>>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != data.n() {
                return Err(Error::Data(format!(
                    "label count {} does not match point count {}",
                    l.len(),
                    data.n()
                )));
            }
        }
        Ok(Self { data, labels })
    }
}
