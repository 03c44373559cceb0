//! Experiment runner for `avoidwalk-core`: named experiments, deterministic
//! seeding and JSON/CSV reports.

pub mod config;
mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use report::{Outcome, Provenance};
