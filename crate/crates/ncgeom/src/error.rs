use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown point label `{0}`")]
    UnknownLabel(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
