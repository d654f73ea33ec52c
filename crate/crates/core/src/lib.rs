//! Trajectory PHD/CPHD filtering for multiple extended targets.
//!
//! This crate implements two Gaussian-mixture multi-target trackers over sets
//! of trajectories, both with an explicit elliptical extent model (orientation
//! plus two semi-axes) updated measurement-by-measurement:
//!
//! * [`tphd`] — the trajectory PHD recursion for extended targets,
//! * [`tcphd`] — the cardinalized variant that additionally propagates a
//!   probability mass function over the number of alive trajectories.
//!
//! Supporting machinery lives in dedicated modules: the shared data model
//! ([`types`]), the constant-velocity/static-shape state space ([`motion`]),
//! measurement-set partitioning ([`partition`]), the decoupled
//! kinematic/shape measurement update ([`extent`]), mixture pruning/merging
//! and trajectory extraction ([`reduction`]), evaluation metrics
//! ([`metrics`]) and a measurement simulator ([`sim`]).

pub mod error;
pub mod extent;
mod logdomain;
pub mod metrics;
pub mod motion;
pub mod partition;
pub mod reduction;
pub mod sim;
pub mod tcphd;
pub mod tphd;
pub mod types;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Result, TrackError};
