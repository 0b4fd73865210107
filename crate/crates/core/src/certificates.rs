//! Closed-form guarantees evaluated on concrete instances: the PGD basin of
//! attraction and limit error, the ESPRIT perturbation bounds, and the
//! amplitude error bound of the least-squares step. Hypotheses that fail are
//! reported through `applicable` flags rather than errors.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, singular_values};
use crate::metrics::{min_separation, PsfMetrics};
use crate::model::{gained_vandermonde, psf_diagonal, CMatrix, GroundTruth, Psf, SamplingGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Certificate {
    pub alpha: f64,
    pub beta: f64,
    /// `4(α+1) β ‖Z‖_F / u★_min`.
    pub noise_condition_lhs: f64,
    /// Upper fixed point of the contraction map; initial errors below it converge.
    pub basin_radius: f64,
    /// Lower fixed point of the contraction map; the limit error bound.
    pub gamma_inf: f64,
    /// `Δ > (2/3) ρ_{g′}`.
    pub separation_ok: bool,
    pub applicable: bool,
    pub u_min: f64,
    pub u_max: f64,
    pub separation: f64,
    pub z_norm: f64,
}

pub fn theorem1_certificate(truth: &GroundTruth, metrics: &PsfMetrics, z_norm: f64, period: f64) -> Result<Theorem1Certificate> {
    let u = truth.row_norms();
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = u.iter().copied().fold(0.0, f64::max);
    if !(u_min > 0.0) {
        return Err(Error::InvalidArgument("u★_min must be positive".into()));
    }
    if !(z_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise norm must be nonnegative, got {z_norm}")));
    }
    let separation = min_separation(&truth.tau, period);
    let inv = 1.0 / separation;
    let sep_factor = 1.0 - 2.0 / 3.0 * metrics.rho_g1 * inv;
    let separation_ok = sep_factor > 0.0;
    let mut cert = Theorem1Certificate {
        alpha: f64::NAN,
        beta: f64::NAN,
        noise_condition_lhs: f64::NAN,
        basin_radius: f64::NAN,
        gamma_inf: f64::NAN,
        separation_ok,
        applicable: false,
        u_min,
        u_max,
        separation,
        z_norm,
    };
    if !separation_ok {
        return Ok(cert);
    }
    let alpha = 1.0
        + (u_max / u_min) * (metrics.e_g2.sqrt() / metrics.e_g1)
            * ((1.0 + 0.5 * metrics.rho_g2 * inv) / sep_factor).sqrt();
    let beta = 1.0 / (period * metrics.e_g1 * sep_factor).sqrt();
    let lhs = 4.0 * (alpha + 1.0) * beta * z_norm / u_min;
    cert.alpha = alpha;
    cert.beta = beta;
    cert.noise_condition_lhs = lhs;
    if lhs <= 1.0 {
        let root = (1.0 - lhs).sqrt();
        cert.basin_radius = (1.0 + root) / (2.0 * (alpha + 1.0));
        // (1 - √(1-x)) rewritten as x / (1 + √(1-x)) to avoid cancellation
        cert.gamma_inf = lhs / (1.0 + root) / (2.0 * (alpha + 1.0));
        cert.applicable = true;
    }
    Ok(cert)
}

/// `f₁(η) = (α η² + β ‖Z‖_F / u_min) / (1 − η)`.
pub fn f1_map(eta: f64, cert: &Theorem1Certificate, z_norm: f64, u_min: f64) -> Result<f64> {
    if !(eta < 1.0) || eta < 0.0 {
        return Err(Error::InvalidArgument(format!("contraction map needs 0 ≤ η < 1, got {eta}")));
    }
    Ok((cert.alpha * eta * eta + cert.beta * z_norm / u_min) / (1.0 - eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Certificate {
    /// Spectral norm of `G`, `max |ĝ(f_u)|`.
    pub g_norm: f64,
    /// `1 − ‖G‖² r / (T E_g (1 − ½ ρ_g Δ⁻¹))`.
    pub denom: f64,
    /// Largest subspace distance for which the location bound holds.
    pub dist_threshold: f64,
    /// `T ϱ_g / denom`: the location error bound per unit subspace distance,
    /// up to an absolute constant (taken as 1).
    pub md_bound_factor: f64,
    /// Davis–Kahan bound on the subspace distance, when the noise is known.
    pub dk_bound: Option<f64>,
    pub applicable: bool,
}

/// Evaluates the subspace-perturbation quantities from scalar inputs.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_quantities(
    r: usize,
    n_samples: usize,
    g_norm: f64,
    period: f64,
    e_g: f64,
    rho_g: f64,
    separation: f64,
    varrho_g: f64,
) -> Theorem2Certificate {
    let sep_factor = 1.0 - 0.5 * rho_g / separation;
    let denom = if r == 0 { 1.0 } else { 1.0 - g_norm * g_norm * r as f64 / (period * e_g * sep_factor) };
    let applicable = sep_factor > 0.0 && denom > 0.0 && n_samples > r;
    let (dist_threshold, md_bound_factor) = if sep_factor > 0.0 && denom > 0.0 {
        (denom.sqrt() / (2.0 * std::f64::consts::SQRT_2), period * varrho_g / denom)
    } else {
        (f64::NAN, f64::NAN)
    };
    Theorem2Certificate { g_norm, denom, dist_threshold, md_bound_factor, dk_bound: None, applicable }
}

pub fn theorem2_certificate(
    truth: &GroundTruth,
    psf: &Psf,
    metrics: &PsfMetrics,
    grid: &SamplingGrid,
    noise: Option<&CMatrix>,
) -> Result<Theorem2Certificate> {
    let g_norm = psf_diagonal(psf, grid).norm();
    let separation = min_separation(&truth.tau, grid.period());
    let mut cert = theorem2_quantities(
        truth.r(),
        grid.len(),
        g_norm,
        grid.period(),
        metrics.e_g,
        metrics.rho_g,
        separation,
        metrics.varrho_g,
    );
    if let Some(z) = noise {
        cert.dk_bound = match davis_kahan_bound(truth, psf, grid, z, metrics) {
            Ok(b) => Some(b),
            Err(Error::Inapplicable(_)) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(cert)
}

/// `min_c ‖E − cI‖₂` for Hermitian `E`: half the spread of its spectrum.
pub fn centered_spectral_norm(e: &CMatrix) -> Result<f64> {
    let eig = hermitian_eigenvalues(e)?;
    Ok(match (eig.first(), eig.last()) {
        (Some(lo), Some(hi)) => 0.5 * (hi - lo),
        _ => 0.0,
    })
}

/// Perturbation `G V A Zᴴ + Z Aᴴ Vᴴ Gᴴ + Z Zᴴ` of the data Gram matrix.
pub fn gram_perturbation(truth: &GroundTruth, psf: &Psf, grid: &SamplingGrid, z: &CMatrix) -> Result<CMatrix> {
    let signal = gained_vandermonde(&truth.tau, psf, grid) * &truth.amplitudes;
    if z.shape() != signal.shape() {
        return Err(Error::Dimension(format!(
            "noise is {}×{}, expected {}×{}",
            z.nrows(),
            z.ncols(),
            signal.nrows(),
            signal.ncols()
        )));
    }
    let cross = &signal * z.adjoint();
    Ok(&cross + cross.adjoint() + z * z.adjoint())
}

/// `2 min_c ‖E − cI‖ / (T E_g (1 − ½ ρ_g Δ⁻¹))`.
pub fn davis_kahan_bound(
    truth: &GroundTruth,
    psf: &Psf,
    grid: &SamplingGrid,
    z: &CMatrix,
    metrics: &PsfMetrics,
) -> Result<f64> {
    let separation = min_separation(&truth.tau, grid.period());
    let sep_factor = 1.0 - 0.5 * metrics.rho_g / separation;
    if !(sep_factor > 0.0) {
        return Err(Error::Inapplicable(format!(
            "ρ_g / Δ = {} is not below 2",
            metrics.rho_g / separation
        )));
    }
    let e = gram_perturbation(truth, psf, grid, z)?;
    Ok(2.0 * centered_spectral_norm(&e)? / (grid.period() * metrics.e_g * sep_factor))
}

/// Bound on `‖A★ − Â‖_F / ‖A★‖_F` when the locations are within `delta`;
/// `None` when `Δ − 2δ ≤ 0` or the flatness denominator is not positive.
pub fn amplitude_error_bound(delta: f64, metrics: &PsfMetrics, separation: f64) -> Option<f64> {
    if delta == 0.0 {
        return Some(0.0);
    }
    let gap = separation - 2.0 * delta;
    if !(gap > 0.0) || delta < 0.0 {
        return None;
    }
    let denom = 1.0 - 0.5 * metrics.rho_g / gap;
    if !(denom > 0.0) {
        return None;
    }
    let num = 1.0 + 2.0 / 3.0 * metrics.rho_g1 / gap;
    Some(delta * (metrics.e_g1 / metrics.e_g * num / denom).sqrt())
}

/// Lower bound on `σ_min(G V_τ★)²` implied by the ESPRIT denominators,
/// compared with its actual value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramBoundCheck {
    pub sigma_min_sq: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn gram_lower_bound_check(
    truth: &GroundTruth,
    psf: &Psf,
    grid: &SamplingGrid,
    metrics: &PsfMetrics,
) -> Result<GramBoundCheck> {
    let s = singular_values(&gained_vandermonde(&truth.tau, psf, grid))?;
    let sigma_min_sq = s.last().copied().unwrap_or(0.0).powi(2);
    let separation = min_separation(&truth.tau, grid.period());
    let bound = grid.period() * metrics.e_g * (1.0 - 0.5 * metrics.rho_g / separation);
    Ok(GramBoundCheck { sigma_min_sq, bound, holds: !(bound > 0.0) || sigma_min_sq >= bound * (1.0 - 1e-12) })
}

/// A measured quantity that exceeded the bound it should satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub seed: u64,
    pub kind: FindingKind,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// `η_{k+1} > f₁(η_k)` along a PGD trace.
    Contraction,
    /// Final weighted error above `γ∞`.
    LimitError,
    /// Subspace distance above the Davis–Kahan bound.
    DavisKahan,
    /// Least-squares amplitude error above its bound.
    AmplitudeBound,
    /// `σ_min(G V)²` below the implied lower bound.
    GramLowerBound,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::Contraction => "contraction",
            FindingKind::LimitError => "limit_error",
            FindingKind::DavisKahan => "davis_kahan",
            FindingKind::AmplitudeBound => "amplitude_bound",
            FindingKind::GramLowerBound => "gram_lower_bound",
        }
    }
}

pub fn write_findings_csv<W: Write>(findings: &[Finding], mut w: W) -> std::io::Result<()> {
    writeln!(w, "seed,kind,measured,bound,detail")?;
    for f in findings {
        writeln!(w, "{},{},{:e},{:e},{}", f.seed, f.kind.as_str(), f.measured, f.bound, f.detail.replace(',', ";"))?;
    }
    Ok(())
}

/// Checks `η_{k+1} ≤ f₁(η_k) + tol` along a sequence of weighted errors.
/// Returns the violations as `(k, η_{k+1}, f₁(η_k))`.
pub fn contraction_violations(etas: &[f64], cert: &Theorem1Certificate, tol: f64) -> Vec<(usize, f64, f64)> {
    etas.windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let bound = f1_map(w[0], cert, cert.z_norm, cert.u_min).unwrap_or(f64::INFINITY);
            (w[1] > bound + tol).then_some((k, w[1], bound))
        })
        .collect()
}
