//! Spike deconvolution from Fourier samples with a known point spread
//! function: modified ESPRIT initialization refined by preconditioned
//! gradient descent, plus closed-form convergence certificates and a Monte
//! Carlo harness.

// `!(x > 0.0)` is used on purpose so NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod certificates;
pub mod error;
pub mod esprit;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pgd;
mod quadrature;
pub mod serde_complex;

pub use error::{Error, Result};
