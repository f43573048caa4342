//! Configuration, presets and file output for the `phasecool` command.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{load_config, ExperimentConfig};
pub use error::CliError;
