//! Non-linear least squares over amplitudes and locations, solved by
//! gradient steps preconditioned with the Gauss–Newton metric `MᴴWᴴWM`.
//!
//! Amplitudes are complex and differentiated in the Wirtinger sense: the
//! amplitude block of the gradient is `∂L/∂Re a + i ∂L/∂Im a`. Locations are
//! real, so their block is the real part of the complex chain rule. The
//! preconditioner is applied in the matching real coordinates
//! `(Re a, Im a, τ)`, which keeps every update of `τ` real.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{weighted_error, PsfMetrics};
use crate::model::{
    canonical, frequency_ramp, gained_vandermonde, scale_rows, CMatrix, GroundTruth, Measurements,
    Psf, SamplingGrid,
};
use crate::serde_complex;

/// Optimization variable `θ = [a₁; …; a_L; τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    #[serde(with = "serde_complex::matrix")]
    pub amplitudes: CMatrix,
    pub tau: Vec<f64>,
    #[serde(rename = "T")]
    pub period: f64,
}

impl ParamVector {
    pub fn new(amplitudes: CMatrix, tau: Vec<f64>, period: f64) -> Result<Self> {
        if amplitudes.nrows() != tau.len() || tau.is_empty() || amplitudes.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "amplitudes {}×{} do not match {} locations",
                amplitudes.nrows(),
                amplitudes.ncols(),
                tau.len()
            )));
        }
        if !(period > 0.0) || tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("locations and period must be finite".into()));
        }
        let tau = tau.into_iter().map(|t| canonical(t, period)).collect();
        Ok(Self { amplitudes, tau, period })
    }

    pub fn from_truth(truth: &GroundTruth) -> Self {
        Self { amplitudes: truth.amplitudes.clone(), tau: truth.tau.clone(), period: truth.period }
    }

    pub fn r(&self) -> usize {
        self.tau.len()
    }

    pub fn snapshots(&self) -> usize {
        self.amplitudes.ncols()
    }

    /// Stacked complex vector of length `r(L+1)`; the τ block has zero imaginary part.
    pub fn stack(&self) -> DVector<Complex64> {
        let (r, l) = (self.r(), self.snapshots());
        let mut v = DVector::zeros(r * (l + 1));
        for ell in 0..l {
            for j in 0..r {
                v[ell * r + j] = self.amplitudes[(j, ell)];
            }
        }
        for j in 0..r {
            v[l * r + j] = Complex64::new(self.tau[j], 0.0);
        }
        v
    }

    /// Inverse of [`stack`](Self::stack); the τ block keeps its real part.
    pub fn unstack(v: &DVector<Complex64>, r: usize, snapshots: usize, period: f64) -> Result<Self> {
        if v.len() != r * (snapshots + 1) {
            return Err(Error::Dimension(format!(
                "stacked vector has length {}, expected {}",
                v.len(),
                r * (snapshots + 1)
            )));
        }
        let amplitudes = CMatrix::from_fn(r, snapshots, |j, ell| v[ell * r + j]);
        let tau = (0..r).map(|j| v[snapshots * r + j].re).collect();
        Self::new(amplitudes, tau, period)
    }

    fn check(&self, meas: &Measurements, grid: &SamplingGrid) -> Result<()> {
        if meas.y.nrows() != grid.len() || meas.y.ncols() != self.snapshots() {
            return Err(Error::Dimension(format!(
                "measurements are {}×{}, expected {}×{}",
                meas.y.nrows(),
                meas.y.ncols(),
                grid.len(),
                self.snapshots()
            )));
        }
        Ok(())
    }
}

/// `M_A = [[I_{Lr}, 0], [0, diag(a₁); …; diag(a_L)]]`, size `2Lr × (L+1)r`.
pub fn build_m(a: &CMatrix) -> CMatrix {
    let (r, l) = a.shape();
    let mut m = CMatrix::zeros(2 * l * r, (l + 1) * r);
    for i in 0..l * r {
        m[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for ell in 0..l {
        for j in 0..r {
            m[(l * r + ell * r + j, l * r + j)] = a[(j, ell)];
        }
    }
    m
}

/// `W_τ = [I_L ⊗ G V_τ | I_L ⊗ G Λ V_τ]`, size `LN × 2Lr`.
pub fn build_w(tau: &[f64], snapshots: usize, psf: &Psf, grid: &SamplingGrid) -> CMatrix {
    let (n, r, l) = (grid.len(), tau.len(), snapshots);
    let gv = gained_vandermonde(tau, psf, grid);
    let glv = scale_rows(gv.clone(), &frequency_ramp(grid));
    let mut w = CMatrix::zeros(l * n, 2 * l * r);
    for ell in 0..l {
        w.view_mut((ell * n, ell * r), (n, r)).copy_from(&gv);
        w.view_mut((ell * n, l * r + ell * r), (n, r)).copy_from(&glv);
    }
    w
}

/// Residual `G V_τ A − Y`.
fn residual(theta: &ParamVector, meas: &Measurements, psf: &Psf, grid: &SamplingGrid) -> CMatrix {
    gained_vandermonde(&theta.tau, psf, grid) * &theta.amplitudes - &meas.y
}

/// `½ ‖G V_τ A − Y‖_F²`.
pub fn loss(theta: &ParamVector, meas: &Measurements, psf: &Psf, grid: &SamplingGrid) -> Result<f64> {
    theta.check(meas, grid)?;
    Ok(0.5 * residual(theta, meas, psf, grid).norm_squared())
}

/// Gradient `Mᴴ Wᴴ vec(G V_τ A − Y)`, with the real part taken on the τ block.
pub fn gradient(
    theta: &ParamVector,
    meas: &Measurements,
    psf: &Psf,
    grid: &SamplingGrid,
) -> Result<DVector<Complex64>> {
    theta.check(meas, grid)?;
    let (r, l) = (theta.r(), theta.snapshots());
    let gv = gained_vandermonde(&theta.tau, psf, grid);
    let glv = scale_rows(gv.clone(), &frequency_ramp(grid));
    let res = &gv * &theta.amplitudes - &meas.y;
    let amp = gv.adjoint() * &res;
    let loc = glv.adjoint() * &res;
    let mut g = DVector::zeros(r * (l + 1));
    for ell in 0..l {
        for j in 0..r {
            g[ell * r + j] = amp[(j, ell)];
        }
    }
    for j in 0..r {
        let s: Complex64 = (0..l).map(|ell| theta.amplitudes[(j, ell)].conj() * loc[(j, ell)]).sum();
        g[l * r + j] = Complex64::new(s.re, 0.0);
    }
    Ok(g)
}

/// Complex Gram matrix `Mᴴ Wᴴ W M` at `θ`.
pub fn gram(theta: &ParamVector, psf: &Psf, grid: &SamplingGrid) -> CMatrix {
    let wm = build_w(&theta.tau, theta.snapshots(), psf, grid) * build_m(&theta.amplitudes);
    wm.adjoint() * wm
}

/// Gram matrix of the Jacobian in real coordinates `(Re a, Im a, τ)`.
pub fn realified_gram(theta: &ParamVector, psf: &Psf, grid: &SamplingGrid) -> DMatrix<f64> {
    let h = gram(theta, psf, grid);
    let (r, l) = (theta.r(), theta.snapshots());
    let na = l * r;
    let dim = 2 * na + r;
    // real coordinate k maps to (complex column, multiplied by i?)
    let coord = |k: usize| -> (usize, bool) {
        if k < na {
            (k, false)
        } else if k < 2 * na {
            (k - na, true)
        } else {
            (k - na, false)
        }
    };
    DMatrix::from_fn(dim, dim, |p, q| {
        let (cp, ip) = coord(p);
        let (cq, iq) = coord(q);
        let mut v = h[(cp, cq)];
        // ⟨i c_p, c_q⟩ = -i⟨c_p, c_q⟩ ; ⟨c_p, i c_q⟩ = i⟨c_p, c_q⟩
        if ip {
            v *= Complex64::new(0.0, -1.0);
        }
        if iq {
            v *= Complex64::new(0.0, 1.0);
        }
        v.re
    })
}

fn realify(g: &DVector<Complex64>, r: usize, snapshots: usize) -> DVector<f64> {
    let na = r * snapshots;
    DVector::from_fn(2 * na + r, |k, _| {
        if k < na {
            g[k].re
        } else if k < 2 * na {
            g[k - na].im
        } else {
            g[k - na].re
        }
    })
}

fn complexify(x: &DVector<f64>, r: usize, snapshots: usize) -> DVector<Complex64> {
    let na = r * snapshots;
    DVector::from_fn(na + r, |k, _| {
        if k < na {
            Complex64::new(x[k], x[k + na])
        } else {
            Complex64::new(x[k + na], 0.0)
        }
    })
}

/// Result of applying the preconditioner to a gradient.
#[derive(Debug, Clone)]
pub struct PreconditionedStep {
    pub step: DVector<Complex64>,
    /// Ratio of extreme eigenvalues of the regularized metric.
    pub condition: f64,
}

/// Solves `(H + εI) x = g` where `H` is the Gauss–Newton metric in real
/// coordinates and `ε = eps_reg · tr(H) / dim`.
pub fn preconditioner_apply(
    theta: &ParamVector,
    gradient_vec: &DVector<Complex64>,
    psf: &Psf,
    grid: &SamplingGrid,
    eps_reg: f64,
) -> Result<PreconditionedStep> {
    let (r, l) = (theta.r(), theta.snapshots());
    if gradient_vec.len() != r * (l + 1) {
        return Err(Error::Dimension(format!(
            "gradient has length {}, expected {}",
            gradient_vec.len(),
            r * (l + 1)
        )));
    }
    let mut h = realified_gram(theta, psf, grid);
    let dim = h.nrows();
    let eps = eps_reg * h.trace() / dim as f64;
    for k in 0..dim {
        h[(k, k)] += eps;
    }
    let eig = h.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let chol = h.cholesky().ok_or(Error::Preconditioner { condition })?;
    let x = chol.solve(&realify(gradient_vec, r, l));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Preconditioner { condition });
    }
    Ok(PreconditionedStep { step: complexify(&x, r, l), condition })
}

/// Applies the real Gauss–Newton metric to a stacked vector; used to check solves.
pub fn metric_apply(theta: &ParamVector, x: &DVector<Complex64>, psf: &Psf, grid: &SamplingGrid) -> DVector<Complex64> {
    let (r, l) = (theta.r(), theta.snapshots());
    let hx = realified_gram(theta, psf, grid) * realify(x, r, l);
    complexify(&hx, r, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdOptions {
    pub max_iters: usize,
    /// Stop once the preconditioned step norm falls below this.
    pub grad_tol: f64,
    /// Stop once `‖θ_{k+1} − θ_k‖ / ‖θ_k‖` falls below this.
    pub param_tol: f64,
    /// Relative Tikhonov floor of the preconditioner solve.
    pub eps_reg: f64,
    /// Halve a loss-increasing step up to 10 times.
    pub safeguard: bool,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self { max_iters: 50, grad_tol: 1e-12, param_tol: 1e-14, eps_reg: 1e-12, safeguard: true }
    }
}

impl PgdOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("grad_tol", self.grad_tol), ("param_tol", self.param_tol), ("eps_reg", self.eps_reg)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub const MAX_HALVINGS: u32 = 10;

/// State of iterate `θ_k` and of the step taken from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Weighted error against the reference, when one is supplied.
    pub eta: Option<f64>,
    /// Condition estimate of the metric at `θ_k`; `None` on the final record
    /// when no step was attempted.
    pub precond_cond: Option<f64>,
    pub halvings: u32,
    /// Whether a step from `θ_k` was taken.
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepTolerance,
    ParamTolerance,
    MaxIters,
    NoDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdTrace {
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl PgdTrace {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.eta).collect()
    }

    /// CSV with header `k,loss,grad_norm,eta,precond_cond,halvings`; absent
    /// values are empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        writeln!(w, "k,loss,grad_norm,eta,precond_cond,halvings")?;
        for rec in &self.records {
            writeln!(
                w,
                "{},{:e},{:e},{},{},{}",
                rec.k,
                rec.loss,
                rec.grad_norm,
                opt(rec.eta),
                opt(rec.precond_cond),
                rec.halvings
            )?;
        }
        Ok(())
    }
}

/// Ground truth used to report the weighted error along the iterations.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub truth: &'a GroundTruth,
    pub metrics: &'a PsfMetrics,
}

fn stacked_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Runs `θ_{k+1} = θ_k − P_k ∇L(θ_k)` with unit step (halved only by the
/// safeguard) until a stopping rule fires.
pub fn pgd_run(
    theta0: &ParamVector,
    meas: &Measurements,
    psf: &Psf,
    grid: &SamplingGrid,
    opts: &PgdOptions,
    reference: Option<Reference<'_>>,
) -> Result<(ParamVector, PgdTrace)> {
    opts.validate()?;
    theta0.check(meas, grid)?;
    let (r, l, period) = (theta0.r(), theta0.snapshots(), theta0.period);
    if (period - grid.period()).abs() > 1e-12 * period {
        return Err(Error::InvalidArgument("parameter period differs from the grid period".into()));
    }
    let eta_of = |theta: &ParamVector| -> Result<Option<f64>> {
        reference
            .map(|rf| weighted_error(&theta.amplitudes, &theta.tau, rf.truth, rf.metrics))
            .transpose()
    };
    let finite = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("{what} at a PGD iterate")))
        }
    };

    let mut theta = theta0.clone();
    let mut current_loss = finite(loss(&theta, meas, psf, grid)?, "loss")?;
    let mut records = Vec::new();
    let mut k = 0;
    let stop = loop {
        let grad = gradient(&theta, meas, psf, grid)?;
        let grad_norm = stacked_norm(&grad);
        let eta = eta_of(&theta)?;
        let mut record = IterationRecord {
            k,
            loss: current_loss,
            grad_norm,
            eta,
            precond_cond: None,
            halvings: 0,
            accepted: false,
        };
        if k == opts.max_iters {
            records.push(record);
            break StopReason::MaxIters;
        }
        let pre = preconditioner_apply(&theta, &grad, psf, grid, opts.eps_reg)?;
        record.precond_cond = Some(pre.condition);
        let step_norm = stacked_norm(&pre.step);
        if step_norm < opts.grad_tol {
            records.push(record);
            break StopReason::StepTolerance;
        }
        let base = theta.stack();
        let mut scale = 1.0;
        let mut halvings = 0;
        let (next, next_loss) = loop {
            let candidate = ParamVector::unstack(&(&base - &pre.step * Complex64::new(scale, 0.0)), r, l, period)?;
            let candidate_loss = loss(&candidate, meas, psf, grid)?;
            let acceptable = !opts.safeguard || candidate_loss <= current_loss;
            if acceptable && candidate_loss.is_finite() {
                break (Some(candidate), candidate_loss);
            }
            if !opts.safeguard {
                finite(candidate_loss, "loss")?;
            }
            if halvings == MAX_HALVINGS {
                break (None, current_loss);
            }
            halvings += 1;
            scale *= 0.5;
        };
        record.halvings = halvings;
        let Some(next) = next else {
            records.push(record);
            break StopReason::NoDescent;
        };
        record.accepted = true;
        records.push(record);
        let change = step_norm * scale / stacked_norm(&base).max(f64::MIN_POSITIVE);
        theta = next;
        current_loss = next_loss;
        k += 1;
        if change < opts.param_tol {
            let grad_norm = stacked_norm(&gradient(&theta, meas, psf, grid)?);
            records.push(IterationRecord {
                k,
                loss: current_loss,
                grad_norm,
                eta: eta_of(&theta)?,
                precond_cond: None,
                halvings: 0,
                accepted: false,
            });
            break StopReason::ParamTolerance;
        }
    };
    Ok((theta, PgdTrace { records, stop }))
}
