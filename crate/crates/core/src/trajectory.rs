//! Multivariate time series shared by every stage of the pipeline.

use nalgebra::{DMatrix, DVector};
use crate::error::{Error, Result};

/// `N x T` series: one row per observed dimension, one column per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub data: DMatrix<f64>,
    /// Time between consecutive columns, in system time units.
    pub dt: f64,
    pub name: Option<String>,
}

impl Trajectory {
    pub fn new(data: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::arg(format!("dt must be positive and finite, got {dt}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "trajectory entry {pos} is not finite"
            )));
        }
        Ok(Self { data, dt, name: None })
    }

    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::arg("rows have unequal lengths"));
        }
        Self::new(DMatrix::from_fn(n, t, |i, j| rows[i][j]), dt)
    }

    /// Single-row trajectory from a scalar series.
    pub fn from_series(series: &[f64], dt: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, series.len(), series), dt)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0 || self.data.nrows() == 0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn column(&self, t: usize) -> DVector<f64> {
        self.data.column(t).into_owned()
    }

    /// Columns `start..end` as a new trajectory with the same `dt` and name.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            data: self.data.columns(start, end - start).into_owned(),
            dt: self.dt,
            name: self.name.clone(),
        }
    }

    /// Largest `max - min` across rows.
    pub fn max_range(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let row = self.data.row(i);
                row.max() - row.min()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}
