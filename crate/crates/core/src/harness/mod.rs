//! Experiment harness behind the `gnloo` command-line tool.

pub mod adaptive_run;
pub mod check;
pub mod config;
pub mod experiment;
pub mod sweep;

pub use adaptive_run::{run_adaptive, AdaptiveRunConfig};
pub use config::{ExperimentConfig, MatrixSpec};
pub use experiment::{compute_rows, run_experiment, ResultRow, Target};
