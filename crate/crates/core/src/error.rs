use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("discriminant {0} is not negative")]
    NonNegativeDiscriminant(i64),
    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),
    #[error("form is not positive definite")]
    NotPositiveDefinite,
    #[error("internal guard tripped: {0}")]
    Guard(String),
    #[error("inconsistent homology: {0}")]
    Inconsistent(String),
    #[error("boundary maps do not compose to zero")]
    NotAComplex,
    #[error("cache corrupted: {0}")]
    CacheCorrupt(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
