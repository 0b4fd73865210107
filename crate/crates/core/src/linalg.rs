//! Complex dense decompositions backed by faer. nalgebra's complex SVD
//! returns factors that do not reproduce the input on some well-conditioned
//! matrices (observed on noiseless 31×5 Dirac data), so every complex SVD and
//! eigenvalue computation goes through here.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::CMatrix;

fn to_faer(m: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} has non-finite entries")))
    }
}

/// `M = U diag(s) Vᴴ` with `s` nonincreasing and `k = min(rows, cols)` columns.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    /// Minimum-norm least-squares solution of `M X = B`, discarding singular
    /// values below `rcond · s[0]`.
    pub fn solve(&self, b: &CMatrix, rcond: f64) -> Result<CMatrix> {
        if b.nrows() != self.u.nrows() {
            return Err(Error::Dimension(format!("right-hand side has {} rows, expected {}", b.nrows(), self.u.nrows())));
        }
        let cutoff = rcond * self.s.first().copied().unwrap_or(0.0);
        let mut x = self.u.adjoint() * b;
        for (k, &s) in self.s.iter().enumerate() {
            let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
            x.row_mut(k).scale_mut(inv);
        }
        Ok(&self.v * x)
    }
}

pub fn thin_svd(m: &CMatrix) -> Result<Svd> {
    check_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(Svd { u: CMatrix::zeros(m.nrows(), 0), s: Vec::new(), v: CMatrix::zeros(m.ncols(), 0) });
    }
    let svd = to_faer(m).thin_svd().map_err(|e| Error::NonFinite(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Svd { u: from_faer(svd.U()), s, v: from_faer(svd.V()) })
}

/// Nonincreasing singular values.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    check_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m).singular_values().map_err(|e| Error::NonFinite(format!("SVD did not converge: {e:?}")))
}

/// Eigenvalues of a general square complex matrix, in no particular order.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    check_finite(m, "matrix")?;
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("eigenvalues of a {}×{} matrix", m.nrows(), m.ncols())));
    }
    to_faer(m).eigenvalues().map_err(|e| Error::NonFinite(format!("eigensolver did not converge: {e:?}")))
}

/// Nondecreasing eigenvalues of a Hermitian matrix (lower triangle is read).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    check_finite(m, "matrix")?;
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("eigenvalues of a {}×{} matrix", m.nrows(), m.ncols())));
    }
    to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NonFinite(format!("eigensolver did not converge: {e:?}")))
}
