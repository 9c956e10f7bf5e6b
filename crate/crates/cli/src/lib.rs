//! Experiment runner for the `dbsde-core` engine: JSON configs in, JSON and
//! CSV results out.

pub mod config;
pub mod convergence;
pub mod error;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use error::RunError;
