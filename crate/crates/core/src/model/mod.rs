//! Observation model: sampling grid, PSF spectra, Vandermonde matrices and
//! synthesis of noisy Fourier-domain measurements `Y = G V_τ A + Z`.

mod grid;
mod observation;
mod psf;

pub use grid::{canonical, torus_difference, torus_distance, SamplingGrid};
pub use observation::{
    add_noise, forward, frequency_ramp, gained_vandermonde, row_norms, scale_rows, standard_complex_noise, synthesize, vandermonde,
    CMatrix, GroundTruth, Measurements,
};
pub use psf::{psf_diagonal, GainDiagonal, Psf, TabulatedSpectrum, INVERTIBILITY_RTOL};
