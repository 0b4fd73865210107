use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SamplingGrid;
use crate::error::{Error, Result};
use crate::serde_complex;

/// Relative threshold under which a gain entry counts as zero.
pub const INVERTIBILITY_RTOL: f64 = 1e-12;

/// Point spread function, described by its Fourier transform `ĝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psf {
    /// `g = δ`, so `ĝ ≡ 1`.
    Dirac,
    /// `g(t) = exp(-t² / (2σ²))`.
    Gaussian { sigma: f64 },
    /// `g(t) = sin(πBt) / (πBt)`, whose spectrum is `1/B` on `|f| < B/2`.
    TruncatedSinc { bandwidth: f64 },
    /// Tabulated samples of `ĝ`, linearly interpolated, zero outside the table.
    Custom(TabulatedSpectrum),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpectrum {
    pub freqs: Vec<f64>,
    #[serde(with = "serde_complex::vec")]
    pub values: Vec<Complex64>,
}

impl TabulatedSpectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} tabulation frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated spectrum needs at least two samples".into(),
            ));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "tabulation frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { freqs, values })
    }

    fn eval(&self, f: f64) -> Complex64 {
        let first = self.freqs[0];
        let last = *self.freqs.last().unwrap();
        if f < first || f > last {
            return Complex64::new(0.0, 0.0);
        }
        let i = match self.freqs.partition_point(|&x| x <= f) {
            0 => 0,
            k if k >= self.freqs.len() => self.freqs.len() - 2,
            k => k - 1,
        };
        let (f0, f1) = (self.freqs[i], self.freqs[i + 1]);
        let w = (f - f0) / (f1 - f0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn min_spacing(&self) -> f64 {
        self.freqs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

impl Psf {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian width must be positive, got {sigma}"
            )));
        }
        Ok(Psf::Gaussian { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Psf::Dirac => Ok(()),
            Psf::Gaussian { sigma } => Psf::gaussian(*sigma).map(|_| ()),
            Psf::TruncatedSinc { bandwidth } if bandwidth.is_finite() && *bandwidth > 0.0 => Ok(()),
            Psf::TruncatedSinc { bandwidth } => Err(Error::InvalidArgument(format!(
                "sinc bandwidth must be positive, got {bandwidth}"
            ))),
            Psf::Custom(t) => TabulatedSpectrum::new(t.freqs.clone(), t.values.clone()).map(|_| ()),
        }
    }

    /// `ĝ(f)`.
    pub fn spectrum(&self, f: f64) -> Complex64 {
        match self {
            Psf::Dirac => Complex64::new(1.0, 0.0),
            Psf::Gaussian { sigma } => {
                let s = *sigma;
                Complex64::new(s * (2.0 * PI).sqrt() * (-2.0 * PI * PI * s * s * f * f).exp(), 0.0)
            }
            Psf::TruncatedSinc { bandwidth } => {
                let half = 0.5 * bandwidth;
                let v = if f.abs() < half {
                    1.0 / bandwidth
                } else if f.abs() == half {
                    0.5 / bandwidth
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            }
            Psf::Custom(t) => t.eval(f),
        }
    }

    /// `ĝ(f_a) / ĝ(f_b)`, in closed form for the Gaussian so that it stays
    /// finite where both values underflow. Non-finite when `ĝ(f_b) = 0`.
    pub fn spectrum_ratio(&self, f_a: f64, f_b: f64) -> Complex64 {
        match self {
            Psf::Gaussian { sigma } => {
                Complex64::new((2.0 * PI * PI * sigma * sigma * (f_b * f_b - f_a * f_a)).exp(), 0.0)
            }
            _ => {
                let den = self.spectrum(f_b);
                if den.norm() == 0.0 {
                    Complex64::new(f64::INFINITY, 0.0)
                } else {
                    self.spectrum(f_a) / den
                }
            }
        }
    }

    /// `dĝ/df`: analytic for built-in families, central difference for tables.
    pub fn spectrum_derivative(&self, f: f64) -> Complex64 {
        match self {
            Psf::Dirac | Psf::TruncatedSinc { .. } => Complex64::new(0.0, 0.0),
            Psf::Gaussian { sigma } => {
                self.spectrum(f) * (-4.0 * PI * PI * sigma * sigma * f)
            }
            Psf::Custom(t) => {
                let h = 1e-6 * t.min_spacing();
                (t.eval(f + h) - t.eval(f - h)) / (2.0 * h)
            }
        }
    }

    /// Points in the open interval `(lo, hi)` where the spectrum is not smooth.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let candidates: Vec<f64> = match self {
            Psf::Dirac | Psf::Gaussian { .. } => Vec::new(),
            Psf::TruncatedSinc { bandwidth } => vec![-0.5 * bandwidth, 0.5 * bandwidth],
            Psf::Custom(t) => t.freqs.clone(),
        };
        candidates.into_iter().filter(|&x| x > lo && x < hi).collect()
    }

    /// Whether `ĝ` is continuously differentiable, so that pointwise
    /// derivatives describe its variation.
    pub fn is_smooth(&self) -> bool {
        matches!(self, Psf::Dirac | Psf::Gaussian { .. })
    }

    pub fn tabulation(&self) -> Option<&TabulatedSpectrum> {
        match self {
            Psf::Custom(t) => Some(t),
            _ => None,
        }
    }
}

/// Diagonal of `G = diag(ĝ(f))` over the grid, with an invertibility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDiagonal {
    pub values: Vec<Complex64>,
    /// `min |ĝ(f_u)| > 1e-12 · max |ĝ(f_u)|`.
    pub invertible: bool,
}

impl GainDiagonal {
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values))
    }

    /// Spectral norm `‖G‖ = max |ĝ(f_u)|`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn psf_diagonal(psf: &Psf, grid: &SamplingGrid) -> GainDiagonal {
    let values: Vec<Complex64> = grid.frequencies().iter().map(|&f| psf.spectrum(f)).collect();
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    let invertible = max > 0.0 && min > INVERTIBILITY_RTOL * max;
    GainDiagonal { values, invertible }
}
