use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported QAM order {0} (square orders 4, 16, 64, 256 only)")]
    UnsupportedQamOrder(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("spectral overlap between fields {0} and {1}")]
    SpectralOverlap(usize, usize),
    #[error("non-finite field after {0}")]
    NonFinite(String),
    #[error("phase-noise-dominated regime: radial SNR budget {0:e} is not positive")]
    PhaseLimited(f64),
    #[error("quadrature did not converge: relative change {0:e}")]
    NotConverged(f64),
    #[error("Q ratio undefined at C = {0}: mean phasor sum vanishes")]
    UndefinedQ(f64),
    #[error("zero-amplitude samples at {0} positions")]
    ZeroAmplitude(usize),
    #[error("malformed dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
