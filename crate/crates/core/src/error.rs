use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible replica counts: {0} vs {1}")]
    IncompatibleK(usize, usize),
    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension {dim} must exceed k = {k}")]
    DimensionTooSmall { dim: u64, k: usize },
    #[error("need moments up to order {needed}, have {available}")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
