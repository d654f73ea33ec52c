//! Error type shared across the crate.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, TrackError>;

/// Errors produced by model construction, filtering and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackError {
    /// A shape state with a non-positive semi-axis.
    InvalidShape(String),
    /// A model or scenario parameter outside its admissible range.
    InvalidConfig(String),
    /// An innovation or extent covariance too ill-conditioned to invert.
    DegenerateCovariance(String),
    /// A partition that is not a disjoint, covering family of nonempty cells.
    InvalidPartition(String),
    /// Exhaustive partition enumeration requested beyond the size guard.
    TooManyMeasurements { len: usize, max: usize },
    /// A mixture or PMF whose total mass vanished; filtering cannot continue.
    NumericalFailure(String),
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::InvalidShape(msg) => write!(f, "invalid shape: {msg}"),
            TrackError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            TrackError::DegenerateCovariance(msg) => {
                write!(f, "degenerate covariance: {msg}")
            }
            TrackError::InvalidPartition(msg) => write!(f, "invalid partition: {msg}"),
            TrackError::TooManyMeasurements { len, max } => write!(
                f,
                "exhaustive partition enumeration limited to {max} measurements, got {len}"
            ),
            TrackError::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for TrackError {}
