//! Batch experiment orchestration for dyne phase-estimation simulations.
//!
//! A run is described by a TOML [`config::ExperimentConfig`], executed by one
//! of the [`commands::Command`]s, and leaves its tables plus a checksummed
//! [`manifest::RunManifest`] in the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;

pub use commands::{run_command, Command};
pub use config::{load_config, parse_config, ExperimentConfig, Overrides, Preset};
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
pub use output::Format;
