//! Experiment harness: configuration, runs, artifacts and the `ald` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod selftest;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use manifest::{RunManifest, RunOutput};
