use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty vertex set")]
    EmptySet,
    #[error("vertex set belongs to a lattice of a different size")]
    LatticeMismatch,
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
