//! Batch front-end of `dphase`. A JSON config describes one experiment; the
//! commands run its stages and record every output in a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod recipes;

pub use commands::{cmd_analyze, cmd_measure, cmd_pipeline, cmd_probe_axioms, cmd_solve};
pub use config::{load, ExperimentConfig, LoadedConfig};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
