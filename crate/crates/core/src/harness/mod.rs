//! Experiment configuration, execution, sweeps and output files.

pub mod config;
pub mod detect;
pub mod experiment;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, SolverChoice};
pub use detect::{DetectionPolicy, DetectionReason};
pub use experiment::{run_experiment, ExperimentReport, RunResult};
pub use sweep::{sweep_mass, SweepRow};
