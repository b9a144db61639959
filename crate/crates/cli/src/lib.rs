//! Experiment runner for the `mmpl-core` simulator.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, Overrides, ValidatedConfig};
pub use run::{render, run_experiment, RunError, RunOutcome};
