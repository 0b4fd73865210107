use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform Fourier sampling grid `(1/T)·{-n, ..., n}` with `N = 2n + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    n: usize,
    #[serde(rename = "T")]
    period: f64,
}

impl SamplingGrid {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        Ok(Self { n, period })
    }

    /// Half-width `n` of the index range.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples `N = 2n + 1`.
    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Signed frequency index `u ∈ {-n, ..., n}` of row `row`.
    pub fn index(&self, row: usize) -> i64 {
        row as i64 - self.n as i64
    }

    /// Frequency `u / T` of row `row`, rows ascending.
    pub fn frequency(&self, row: usize) -> f64 {
        self.index(row) as f64 / self.period
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|row| self.frequency(row)).collect()
    }

    /// Upper edge `N / (2T)` of the observation band `J_N`.
    pub fn band_edge(&self) -> f64 {
        self.len() as f64 / (2.0 * self.period)
    }

    /// Reduce a location into the fundamental domain `[0, T)`.
    pub fn canonical(&self, tau: f64) -> f64 {
        canonical(tau, self.period)
    }
}

/// Reduce `tau` into `[0, period)`.
pub fn canonical(tau: f64, period: f64) -> f64 {
    let x = tau.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if x >= period {
        0.0
    } else {
        x
    }
}

/// Distance between two points of the circle `R / TZ`.
pub fn torus_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d).max(0.0)
}

/// Signed torus difference `a - b` reduced into `[-T/2, T/2)`.
pub fn torus_difference(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b + 0.5 * period).rem_euclid(period) - 0.5 * period;
    if d >= 0.5 * period {
        d - period
    } else {
        d
    }
}
