//! Library side of the `qwalk` command: run configuration, file formats and
//! the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::{LoadedConfig, RunConfig};
pub use error::CliError;
