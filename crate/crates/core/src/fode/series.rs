use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled signal starting at `t0` with step `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub h: f64,
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(h: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive, got {h}")));
        }
        Ok(TimeSeries { h, t0, samples })
    }

    /// Samples `f(t0 + m h)` for `m = 0..len`.
    pub fn from_fn(h: f64, len: usize, f: impl Fn(f64) -> f64) -> Self {
        TimeSeries {
            h,
            t0: 0.0,
            samples: (0..len).map(|m| f(m as f64 * h)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.h
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|m| self.time(m))
    }

    pub fn last(&self) -> Option<f64> {
        self.samples.last().copied()
    }

    /// Sample nearest to time `t`, if inside the series.
    pub fn at(&self, t: f64) -> Option<f64> {
        let m = ((t - self.t0) / self.h).round();
        if m < 0.0 {
            return None;
        }
        self.samples.get(m as usize).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest |self - other| over the common prefix of two series on the
    /// same grid.
    pub fn max_abs_diff(&self, other: &TimeSeries) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs())))
    }

    pub fn check_same_grid(&self, other: &TimeSeries) -> Result<()> {
        let tol = 1e-12 * self.h.max(other.h);
        if (self.h - other.h).abs() > tol || (self.t0 - other.t0).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "h {} vs {}, t0 {} vs {}",
                self.h, other.h, self.t0, other.t0
            )));
        }
        Ok(())
    }

    /// Keeps every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> TimeSeries {
        let stride = stride.max(1);
        TimeSeries {
            h: self.h * stride as f64,
            t0: self.t0,
            samples: self.samples.iter().step_by(stride).copied().collect(),
        }
    }
}
