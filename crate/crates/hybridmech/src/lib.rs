//! File formats, configuration and the command-line runner for
//! `hybridmech-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
