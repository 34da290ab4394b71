use thiserror::Error;

/// Errors produced by geometry construction, coarray analysis, and the
/// estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A construction was asked for a sensor count outside its validity range.
    #[error("{label}: sensor count {given} is unsupported ({constraint})")]
    SensorCount {
        label: &'static str,
        given: i64,
        constraint: &'static str,
    },

    /// A construction that cannot be materialized as a position set at all.
    #[error("{label} construction is unavailable: {reason}")]
    UnsupportedConstruction { label: &'static str, reason: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Numerical / model-level failures in the estimation pipeline.
    #[error("estimation: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
