//! Modified ESPRIT for a known PSF: the shift-invariance equation of the
//! signal subspace is corrected by the diagonal gain ratios `G₁G₂⁻¹`, so the
//! PSF never has to be equalized out of the data.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, hermitian_eigenvalues, thin_svd, Svd};
use crate::model::{canonical, gained_vandermonde, CMatrix, GroundTruth, Psf, SamplingGrid};
use crate::serde_complex;

/// Relative singular-value floor below which a factor counts as rank deficient.
const RANK_RTOL: f64 = 1e-12;

/// Orthonormal basis of an estimated `r`-dimensional signal subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSubspace {
    pub basis: CMatrix,
    /// Singular values of the data, descending (empty for a supplied basis).
    pub singular_values: Vec<f64>,
}

impl SignalSubspace {
    pub fn from_basis(basis: CMatrix) -> Self {
        Self { basis, singular_values: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `σ_r − σ_{r+1}` of the data (`σ_{r+1} = 0` when absent).
    pub fn gap(&self) -> f64 {
        let r = self.rank();
        match (self.singular_values.get(r.wrapping_sub(1)), self.singular_values.get(r)) {
            (Some(a), Some(b)) => a - b,
            (Some(a), None) => *a,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspritResult {
    pub tau_hat: Vec<f64>,
    #[serde(with = "serde_complex::vec")]
    pub eigenvalues: Vec<Complex64>,
    #[serde(rename = "U_hat", with = "serde_complex::matrix")]
    pub u_hat: CMatrix,
    pub singular_values: Vec<f64>,
    pub subspace_gap: f64,
}

/// Rotates each column so its largest-magnitude entry is real and positive.
fn fix_phase(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let mut best = (0usize, -1.0f64);
        for (i, z) in col.iter().enumerate() {
            if z.norm() > best.1 * (1.0 + 1e-12) {
                best = (i, z.norm());
            }
        }
        if best.1 > 0.0 {
            let phase = col[best.0] / best.1;
            let rot = phase.conj();
            for z in col.iter_mut() {
                *z *= rot;
            }
            col[best.0] = Complex64::new(col[best.0].norm(), 0.0);
        }
    }
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
fn column_basis(m: &CMatrix, what: &str) -> Result<CMatrix> {
    let Svd { u, s, .. } = thin_svd(m)?;
    let r = m.ncols();
    if s.len() < r || !(s[r - 1] > RANK_RTOL * s[0]) {
        return Err(Error::RankDeficient(format!("{what} does not have full column rank")));
    }
    let mut basis = u.columns(0, r).into_owned();
    fix_phase(&mut basis);
    Ok(basis)
}

/// Top-`r` left singular vectors of `Y`.
pub fn signal_subspace(y: &CMatrix, r: usize) -> Result<SignalSubspace> {
    if r == 0 {
        return Err(Error::InvalidArgument("model order must be at least 1".into()));
    }
    if y.nrows() < r + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least r + 1 = {} frequencies, have {}",
            r + 1,
            y.nrows()
        )));
    }
    let Svd { u, s, .. } = thin_svd(y)?;
    if s.len() < r || !(s[r - 1] > RANK_RTOL * s[0]) {
        return Err(Error::RankDeficient(format!(
            "data has fewer than {r} significant singular values"
        )));
    }
    let mut basis = u.columns(0, r).into_owned();
    fix_phase(&mut basis);
    Ok(SignalSubspace { basis, singular_values: s })
}

/// Diagonal of `G₁ G₂⁻¹`: `ĝ(f_m) / ĝ(f_{m+1})` for consecutive frequencies.
pub fn shift_gains(psf: &Psf, grid: &SamplingGrid) -> Result<Vec<Complex64>> {
    (0..grid.len() - 1)
        .map(|m| {
            let ratio = psf.spectrum_ratio(grid.frequency(m), grid.frequency(m + 1));
            if !ratio.re.is_finite() || !ratio.im.is_finite() {
                Err(Error::SingularGain { index: m + 1 })
            } else {
                Ok(ratio)
            }
        })
        .collect()
}

/// Locations from the eigenvalues of `Û₁† G₁ G₂⁻¹ Û₂`.
pub fn esprit_locations(subspace: &SignalSubspace, psf: &Psf, grid: &SamplingGrid) -> Result<EspritResult> {
    let u = &subspace.basis;
    let (n, r) = u.shape();
    if n != grid.len() {
        return Err(Error::Dimension(format!("basis has {n} rows, grid has {}", grid.len())));
    }
    if n < r + 1 {
        return Err(Error::InvalidArgument(format!("need N ≥ r + 1, got N = {n}, r = {r}")));
    }
    let ratios = shift_gains(psf, grid)?;
    let u1 = u.rows(0, n - 1).into_owned();
    let mut u2 = u.rows(1, n - 1).into_owned();
    for (m, d) in ratios.iter().enumerate() {
        for z in u2.row_mut(m).iter_mut() {
            *z *= d;
        }
    }
    let svd = thin_svd(&u1)?;
    if !(svd.s[r - 1] > RANK_RTOL * svd.s[0]) {
        return Err(Error::RankDeficient("truncated subspace basis collapsed".into()));
    }
    let phi = svd.solve(&u2, 0.0)?;
    let eigenvalues = eigenvalues(&phi)?;
    let period = grid.period();
    let tau_hat = eigenvalues
        .iter()
        .map(|lambda| canonical(-period / (2.0 * PI) * lambda.arg(), period))
        .collect();
    Ok(EspritResult {
        tau_hat,
        eigenvalues,
        u_hat: u.clone(),
        singular_values: subspace.singular_values.clone(),
        subspace_gap: subspace.gap(),
    })
}

/// Subspace estimate from `Y` followed by the location estimate.
pub fn esprit(y: &CMatrix, r: usize, psf: &Psf, grid: &SamplingGrid) -> Result<EspritResult> {
    esprit_locations(&signal_subspace(y, r)?, psf, grid)
}

/// `argmin_A ‖G V_τ̂ A − Y‖_F`.
pub fn ls_amplitudes(tau_hat: &[f64], y: &CMatrix, psf: &Psf, grid: &SamplingGrid) -> Result<CMatrix> {
    if y.nrows() != grid.len() {
        return Err(Error::Dimension(format!("data has {} rows, grid has {}", y.nrows(), grid.len())));
    }
    let gv = gained_vandermonde(tau_hat, psf, grid);
    if tau_hat.is_empty() {
        return Err(Error::InvalidArgument("no locations given".into()));
    }
    let svd = thin_svd(&gv)?;
    if !(svd.s[tau_hat.len() - 1] > RANK_RTOL * svd.s[0]) {
        return Err(Error::RankDeficient("G V_τ̂ does not have full column rank".into()));
    }
    svd.solve(y, 0.0)
}

fn check_orthonormal(u: &CMatrix, what: &str) -> Result<()> {
    let gram = u.adjoint() * u;
    let dev = (gram - CMatrix::identity(u.ncols(), u.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-8 {
        return Err(Error::InvalidArgument(format!("{what} is not orthonormal (deviation {dev:e})")));
    }
    Ok(())
}

/// `‖U_a U_aᴴ − U_b U_bᴴ‖₂`.
pub fn subspace_distance(u_a: &CMatrix, u_b: &CMatrix) -> Result<f64> {
    if u_a.shape() != u_b.shape() {
        return Err(Error::Dimension("bases have different shapes".into()));
    }
    check_orthonormal(u_a, "first basis")?;
    check_orthonormal(u_b, "second basis")?;
    let diff = u_a * u_a.adjoint() - u_b * u_b.adjoint();
    let eig = hermitian_eigenvalues(&diff)?;
    Ok(eig.iter().map(|e| e.abs()).fold(0.0, f64::max).min(1.0))
}

/// Orthonormal basis of the column space of `G V_τ★`.
pub fn exact_subspace(truth: &GroundTruth, psf: &Psf, grid: &SamplingGrid) -> Result<CMatrix> {
    column_basis(&gained_vandermonde(&truth.tau, psf, grid), "G V_τ★")
}
