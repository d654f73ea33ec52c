//! Command-layer library for the extended-target trajectory filters:
//! configuration, the simulate/track/evaluate/mc drivers, CSV/JSON
//! persistence and SVG plotting.

pub mod commands;
pub mod config;
pub mod io;
pub mod mc;
pub mod plots;
pub mod runner;
