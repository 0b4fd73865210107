use thiserror::Error;

/// Errors produced by the deconvolution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge after {panels} panels (estimate {estimate:e}, residual {residual:e})")]
    Quadrature {
        panels: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("PSF gain matrix singular at frequency index {index}")]
    SingularGain { index: usize },

    #[error("preconditioner factorization failed (condition estimate {condition:e})")]
    Preconditioner { condition: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("hypothesis not satisfied: {0}")]
    Inapplicable(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than
    /// numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::InvalidArgument(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
