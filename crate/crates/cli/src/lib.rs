//! Sweeps, plots and self-checks on top of `mfgs-core`.

pub mod app;
pub mod config;
pub mod error;
pub mod svg;
pub mod sweep;
pub mod verify;
