use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{canonical, psf_diagonal, Psf, SamplingGrid};
use crate::error::{Error, Result};
use crate::serde_complex;

pub type CMatrix = DMatrix<Complex64>;

/// Spike locations and per-snapshot amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "T")]
    pub period: f64,
    pub n: usize,
    pub tau: Vec<f64>,
    /// `r × L` amplitude matrix, one column per snapshot.
    #[serde(with = "serde_complex::matrix")]
    pub amplitudes: CMatrix,
}

impl GroundTruth {
    /// Builds a validated instance; locations are reduced into `[0, T)`.
    pub fn new(grid: &SamplingGrid, tau: Vec<f64>, amplitudes: CMatrix) -> Result<Self> {
        let truth = Self {
            period: grid.period(),
            n: grid.n(),
            tau: tau.into_iter().map(|t| grid.canonical(t)).collect(),
            amplitudes,
        };
        truth.validate()?;
        Ok(truth)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.tau.len();
        if r == 0 {
            return Err(Error::InvalidArgument("at least one spike is required".into()));
        }
        if self.amplitudes.nrows() != r || self.amplitudes.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "amplitudes are {}×{}, expected {r}×L with L ≥ 1",
                self.amplitudes.nrows(),
                self.amplitudes.ncols()
            )));
        }
        if self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("locations must be finite".into()));
        }
        let mut sorted: Vec<f64> = self.tau.iter().map(|&t| canonical(t, self.period)).collect();
        sorted.sort_by(f64::total_cmp);
        let tol = 1e-12 * self.period;
        let wraps = sorted.len() > 1 && sorted[0] + self.period - sorted[sorted.len() - 1] <= tol;
        if wraps || sorted.windows(2).any(|w| w[1] - w[0] <= tol) {
            return Err(Error::InvalidArgument("locations must be distinct modulo T".into()));
        }
        if self.row_norms().iter().any(|&u| !(u > 0.0)) {
            return Err(Error::InvalidArgument(
                "every spike needs a nonzero amplitude row".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::new(self.n, self.period)
    }

    pub fn r(&self) -> usize {
        self.tau.len()
    }

    pub fn snapshots(&self) -> usize {
        self.amplitudes.ncols()
    }

    /// Row norms `u_j = ‖A_{j,:}‖₂`.
    pub fn row_norms(&self) -> Vec<f64> {
        row_norms(&self.amplitudes)
    }
}

pub fn row_norms(a: &CMatrix) -> Vec<f64> {
    a.row_iter().map(|row| row.norm()).collect()
}

/// Observed `N × L` Fourier samples, optionally with the noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    #[serde(rename = "Y", with = "serde_complex::matrix")]
    pub y: CMatrix,
    #[serde(rename = "Z", with = "serde_complex::option_matrix", default)]
    pub z: Option<CMatrix>,
    pub grid: SamplingGrid,
}

impl Measurements {
    pub fn new(y: CMatrix, grid: SamplingGrid) -> Result<Self> {
        if y.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "measurements have {} rows, grid has {} frequencies",
                y.nrows(),
                grid.len()
            )));
        }
        Ok(Self { y, z: None, grid })
    }

    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }

    /// Frobenius norm of the stored noise, zero when none is stored.
    pub fn noise_norm(&self) -> f64 {
        self.z.as_ref().map_or(0.0, |z| z.norm())
    }

    /// CSV rows `freq_index, snapshot, re, im`; `freq_index` is the signed
    /// index `u` of frequency `u / T`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_index,snapshot,re,im")?;
        for row in 0..self.y.nrows() {
            for col in 0..self.y.ncols() {
                let v = self.y[(row, col)];
                writeln!(w, "{},{},{:e},{:e}", self.grid.index(row), col, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// `N × r` matrix with entries `exp(-2iπ f_u τ_j)`, rows ascending in frequency.
pub fn vandermonde(tau: &[f64], grid: &SamplingGrid) -> CMatrix {
    let period = grid.period();
    CMatrix::from_fn(grid.len(), tau.len(), |row, j| {
        // reduce u·τ/T modulo 1 before scaling by 2π to keep the phase exact
        let cycles = (grid.index(row) as f64 * tau[j] / period).rem_euclid(1.0);
        Complex64::from_polar(1.0, -2.0 * PI * cycles)
    })
}

/// Column `j` of the τ-derivative `Λ V_τ`, `Λ = diag(-2iπ f_u)`.
pub fn frequency_ramp(grid: &SamplingGrid) -> Vec<Complex64> {
    grid.frequencies()
        .iter()
        .map(|&f| Complex64::new(0.0, -2.0 * PI * f))
        .collect()
}

/// Left-multiplies by `diag(gains)`.
pub fn scale_rows(mut m: CMatrix, gains: &[Complex64]) -> CMatrix {
    for (row, g) in gains.iter().enumerate() {
        for v in m.row_mut(row).iter_mut() {
            *v *= g;
        }
    }
    m
}

/// `G V_τ`.
pub fn gained_vandermonde(tau: &[f64], psf: &Psf, grid: &SamplingGrid) -> CMatrix {
    scale_rows(vandermonde(tau, grid), &psf_diagonal(psf, grid).values)
}

/// Noiseless forward model `G V_τ A`.
pub fn forward(tau: &[f64], amplitudes: &CMatrix, psf: &Psf, grid: &SamplingGrid) -> Result<CMatrix> {
    if amplitudes.nrows() != tau.len() {
        return Err(Error::Dimension(format!(
            "{} locations but {} amplitude rows",
            tau.len(),
            amplitudes.nrows()
        )));
    }
    let gains = psf_diagonal(psf, grid);
    Ok(scale_rows(vandermonde(tau, grid), &gains.values) * amplitudes)
}

/// `Y = G V_τ A + Z`, storing `Z` when given.
pub fn synthesize(
    truth: &GroundTruth,
    psf: &Psf,
    grid: &SamplingGrid,
    noise: Option<&CMatrix>,
) -> Result<Measurements> {
    let clean = forward(&truth.tau, &truth.amplitudes, psf, grid)?;
    let (y, z) = match noise {
        Some(z) => {
            if z.shape() != clean.shape() {
                return Err(Error::Dimension(format!(
                    "noise is {}×{}, expected {}×{}",
                    z.nrows(),
                    z.ncols(),
                    clean.nrows(),
                    clean.ncols()
                )));
            }
            (&clean + z, Some(z.clone()))
        }
        None => (clean, None),
    };
    Ok(Measurements { y, z, grid: *grid })
}

/// Adds circularly-symmetric complex Gaussian noise at the requested SNR
/// (`‖Y_clean‖_F² / (N L ν²) = 10^{snr/10}`). `snr_db = +∞` yields `Z = 0`.
pub fn add_noise(y_clean: &CMatrix, snr_db: f64, seed: u64) -> Result<(CMatrix, CMatrix)> {
    let (rows, cols) = y_clean.shape();
    if snr_db == f64::INFINITY {
        return Ok((y_clean.clone(), CMatrix::zeros(rows, cols)));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR must not be NaN".into()));
    }
    let energy = y_clean.norm_squared();
    if energy == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot set a finite SNR relative to a zero signal".into(),
        ));
    }
    let variance = energy / ((rows * cols) as f64 * 10f64.powf(snr_db / 10.0));
    let z = standard_complex_noise(rows, cols, seed) * Complex64::new(variance.sqrt(), 0.0);
    Ok((y_clean + &z, z))
}

/// Unit-variance circular complex Gaussian matrix (`E|z|² = 1`).
pub fn standard_complex_noise(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill keeps the draw order independent of shape changes in rows
    let mut z = CMatrix::zeros(rows, cols);
    for col in 0..cols {
        for row in 0..rows {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z[(row, col)] = Complex64::new(re * scale, im * scale);
        }
    }
    z
}
