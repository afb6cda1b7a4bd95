use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("ill-conditioned covariance: {0}")]
    IllConditioned(String),
    #[error("fitting failed: {0}")]
    Fit(String),
    #[error("gradient undefined: predictive sd is zero")]
    GradientUndefined,
    #[error("near-singular update (v = {0:e})")]
    SingularUpdate(f64),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("campaign stopped: {0}")]
    Stopped(String),
    #[error("model not fitted")]
    NotFitted,
    #[error("checksum mismatch for bundled data file {0}")]
    Checksum(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
