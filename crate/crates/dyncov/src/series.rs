use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A T x d array of (typically standardized) returns, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    data: DMatrix<f64>,
    timestamps: Option<Vec<String>>,
}

impl ReturnSeries {
    pub fn new(data: DMatrix<f64>) -> Self {
        ReturnSeries { data, timestamps: None }
    }

    pub fn with_timestamps(data: DMatrix<f64>, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                actual: timestamps.len(),
            });
        }
        Ok(ReturnSeries { data, timestamps: Some(timestamps) })
    }

    /// Build from a list of observation vectors, all of the same dimension.
    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooFewObservations { required: 1, actual: 0 });
        }
        let d = rows[0].len();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
            }
        }
        let data = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(ReturnSeries::new(data))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.data.row(t).transpose()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// The first `n` observations as a new series (timestamps carried along).
    pub fn prefix(&self, n: usize) -> ReturnSeries {
        let n = n.min(self.len());
        ReturnSeries {
            data: self.data.rows(0, n).into_owned(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[..n].to_vec()),
        }
    }
}
