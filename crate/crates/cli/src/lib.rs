//! Experiment runner: configuration and manifest parsing, multi-seed runs,
//! CSV artifacts, aggregation and plots.

pub mod aggregate;
pub mod config;
pub mod experiment;
pub mod manifest;
pub mod plot;
pub mod records;

pub use config::RunConfig;
pub use experiment::{run_experiment, train_one, Report, RunSummary};
pub use manifest::{Cell, Manifest};
