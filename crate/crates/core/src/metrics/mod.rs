//! Conditioning quantities of an instance (separation, band-limited PSF
//! energies, spectral flatness, gain ratio) and error metrics.

mod matching;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use matching::{bottleneck_matching, matching_distance, optimal_matching, Matching, BRUTE_FORCE_MAX};

use crate::error::{Error, Result};
use crate::model::{torus_difference, torus_distance, CMatrix, GroundTruth, Psf, SamplingGrid};
use crate::quadrature::{integrate, DEFAULT_RTOL};

/// Band-limited energies, flatness measures and gain ratio of a PSF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfMetrics {
    #[serde(rename = "E_g")]
    pub e_g: f64,
    #[serde(rename = "E_g1")]
    pub e_g1: f64,
    #[serde(rename = "E_g2")]
    pub e_g2: f64,
    pub rho_g: f64,
    pub rho_g1: f64,
    pub rho_g2: f64,
    /// `+∞` when a gain entry of `G₁` vanishes.
    pub varrho_g: f64,
}

impl PsfMetrics {
    pub fn compute(psf: &Psf, grid: &SamplingGrid) -> Result<Self> {
        Self::compute_with(psf, grid, BandEdges::Exclude)
    }

    pub fn compute_with(psf: &Psf, grid: &SamplingGrid, edges: BandEdges) -> Result<Self> {
        let rho = |order| spectral_flatness_with(psf, grid, order, edges).map(|f| f.rho);
        Ok(Self {
            e_g: band_energy(psf, grid, 0)?,
            e_g1: band_energy(psf, grid, 1)?,
            e_g2: band_energy(psf, grid, 2)?,
            rho_g: rho(0)?,
            rho_g1: rho(1)?,
            rho_g2: rho(2)?,
            varrho_g: gain_ratio(psf, grid).unwrap_or(f64::INFINITY),
        })
    }

    /// The seven scalars in their fixed reporting order.
    pub fn table(&self) -> [(&'static str, f64); 7] {
        [
            ("E_g", self.e_g),
            ("E_g1", self.e_g1),
            ("E_g2", self.e_g2),
            ("rho_g", self.rho_g),
            ("rho_g1", self.rho_g1),
            ("rho_g2", self.rho_g2),
            ("varrho_g", self.varrho_g),
        ]
    }
}

/// Smallest pairwise torus distance; `+∞` for a single spike.
pub fn min_separation(tau: &[f64], period: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in tau.iter().enumerate() {
        for &b in &tau[i + 1..] {
            best = best.min(torus_distance(a, b, period));
        }
    }
    best
}

/// `(2πf)^{2·order}`.
fn weight(f: f64, order: u32) -> f64 {
    (2.0 * PI * f).powi(2 * order as i32)
}

/// Weighted power spectral density `(2πf)^{2k} |ĝ(f)|²` of the `k`-th derivative of `g`.
fn density(psf: &Psf, f: f64, order: u32) -> f64 {
    weight(f, order) * psf.spectrum(f).norm_sqr()
}

fn density_derivative(psf: &Psf, f: f64, order: u32) -> f64 {
    let g = psf.spectrum(f);
    let dg = psf.spectrum_derivative(f);
    let dw = if order == 0 {
        0.0
    } else {
        2.0 * order as f64 * (2.0 * PI).powi(2 * order as i32) * f.powi(2 * order as i32 - 1)
    };
    dw * g.norm_sqr() + weight(f, order) * 2.0 * (g.conj() * dg).re
}

fn check_order(order: u32) -> Result<()> {
    if order > 2 {
        return Err(Error::InvalidArgument(format!("derivative order {order} not in 0..=2")));
    }
    Ok(())
}

/// Points where `|density'|` has a kink, to seed the quadrature panels.
fn kinks(psf: &Psf, grid: &SamplingGrid, order: u32) -> Vec<f64> {
    let edge = grid.band_edge();
    let mut points = psf.breakpoints(-edge, edge);
    points.push(0.0);
    if let Psf::Gaussian { sigma } = psf {
        if order > 0 {
            let peak = (order as f64).sqrt() / (2.0 * PI * sigma);
            points.extend([-peak, peak]);
        }
    }
    points
}

/// `∫_{J_N} (2πf)^{2·order} |ĝ(f)|² df`, the band-limited energy of `g^{(order)}`.
pub fn band_energy(psf: &Psf, grid: &SamplingGrid, order: u32) -> Result<f64> {
    check_order(order)?;
    let edge = grid.band_edge();
    integrate(|f| density(psf, f, order), -edge, edge, &kinks(psf, grid, order), DEFAULT_RTOL)
}

/// Whether the jumps of the band indicator at `±N/(2T)` count toward the
/// variation of the truncated density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandEdges {
    #[default]
    Exclude,
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessMethod {
    /// `∫ |d/df density|` by quadrature, plus jumps at known discontinuities.
    PointwiseDerivative,
    /// Summed absolute increments on the tabulation nodes (custom spectra).
    TabulatedIncrements,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub rho: f64,
    pub method: FlatnessMethod,
}

/// Flatness `ρ = E⁻¹ · TV(density on J_N)` with band-edge jumps excluded.
pub fn spectral_flatness(psf: &Psf, grid: &SamplingGrid, order: u32) -> Result<Flatness> {
    spectral_flatness_with(psf, grid, order, BandEdges::Exclude)
}

pub fn spectral_flatness_with(
    psf: &Psf,
    grid: &SamplingGrid,
    order: u32,
    edges: BandEdges,
) -> Result<Flatness> {
    check_order(order)?;
    let energy = band_energy(psf, grid, order)?;
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument("PSF has no energy in the observation band".into()));
    }
    let edge = grid.band_edge();
    let (interior, method) = match psf.tabulation() {
        Some(table) => {
            let mut nodes: Vec<f64> = table.freqs.iter().copied().filter(|&f| f > -edge && f < edge).collect();
            nodes.push(-edge);
            nodes.push(edge);
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            let tv = nodes
                .windows(2)
                .map(|w| (density(psf, w[1], order) - density(psf, w[0], order)).abs())
                .sum();
            (tv, FlatnessMethod::TabulatedIncrements)
        }
        None => {
            let smooth = integrate(
                |f| density_derivative(psf, f, order).abs(),
                -edge,
                edge,
                &kinks(psf, grid, order),
                DEFAULT_RTOL,
            )?;
            let jumps: f64 = psf
                .breakpoints(-edge, edge)
                .into_iter()
                .map(|b| {
                    let h = 1e-9 * b.abs().max(1.0);
                    (density(psf, b + h, order) - density(psf, b - h, order)).abs()
                })
                .sum();
            (smooth + jumps, FlatnessMethod::PointwiseDerivative)
        }
    };
    let edge_jumps = match edges {
        BandEdges::Exclude => 0.0,
        BandEdges::Include => {
            let inside = edge * (1.0 - 1e-15);
            density(psf, -inside, order) + density(psf, inside, order)
        }
    };
    Ok(Flatness { rho: (interior + edge_jumps) / energy, method })
}

/// `max_m |ĝ(f_{m+1})| / |ĝ(f_m)|` over consecutive grid frequencies.
pub fn gain_ratio(psf: &Psf, grid: &SamplingGrid) -> Result<f64> {
    let mut best = 0.0f64;
    for m in 0..grid.len().saturating_sub(1) {
        let ratio = psf.spectrum_ratio(grid.frequency(m + 1), grid.frequency(m)).norm();
        if !ratio.is_finite() {
            return Err(Error::SingularGain { index: m });
        }
        best = best.max(ratio);
    }
    Ok(best)
}

/// Weighted error between a candidate `(A, τ)` and the truth, after
/// aligning the candidate's spikes by the optimal matching on locations.
pub fn weighted_error(a: &CMatrix, tau: &[f64], truth: &GroundTruth, metrics: &PsfMetrics) -> Result<f64> {
    if a.nrows() != tau.len() || a.ncols() != truth.snapshots() {
        return Err(Error::Dimension(format!(
            "candidate amplitudes are {}×{}, expected {}×{}",
            a.nrows(),
            a.ncols(),
            tau.len(),
            truth.snapshots()
        )));
    }
    let matching = optimal_matching(tau, &truth.tau, truth.period)?;
    let aligned_tau: Vec<f64> = matching.perm.iter().map(|&j| tau[j]).collect();
    let aligned_a = CMatrix::from_fn(a.nrows(), a.ncols(), |k, l| a[(matching.perm[k], l)]);
    weighted_error_aligned(&aligned_a, &aligned_tau, truth, metrics)
}

/// Weighted error with spike `j` of the candidate compared to spike `j` of the truth.
pub fn weighted_error_aligned(
    a: &CMatrix,
    tau: &[f64],
    truth: &GroundTruth,
    metrics: &PsfMetrics,
) -> Result<f64> {
    if a.shape() != truth.amplitudes.shape() || tau.len() != truth.r() {
        return Err(Error::Dimension("candidate and truth shapes differ".into()));
    }
    let u = truth.row_norms();
    if u.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("truth has a zero amplitude row".into()));
    }
    let mut amp = 0.0;
    for j in 0..truth.r() {
        let u4 = u[j].powi(4);
        for l in 0..truth.snapshots() {
            let star = truth.amplitudes[(j, l)];
            amp += star.norm_sqr() / u4 * (a[(j, l)] - star).norm_sqr();
        }
    }
    let loc: f64 = tau
        .iter()
        .zip(&truth.tau)
        .map(|(&t, &s)| torus_difference(t, s, truth.period).powi(2))
        .sum();
    Ok((metrics.e_g * amp + metrics.e_g1 * loc).sqrt())
}

/// `10 log₁₀(‖Y_clean‖² / ‖Z‖²)`, `+∞` for zero noise.
pub fn snr_db(y_clean: &CMatrix, z: &CMatrix) -> f64 {
    let noise = z.norm_squared();
    if noise == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (y_clean.norm_squared() / noise).log10()
}
