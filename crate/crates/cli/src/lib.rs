//! Experiment runner for the grant-free access model: configuration, load
//! sweeps with the granted baseline, figure tables and receiver calibration.

pub mod config;
pub mod experiment;
pub mod power;
pub mod report;

pub use config::{ExperimentConfig, Modes, PolicySpec};
pub use experiment::{evaluate, run_experiment, ExperimentOutput, Row};
pub use report::Figure;
