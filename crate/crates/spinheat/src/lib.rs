//! Batch front end for `spinheat-core`: JSON run configurations, parallel
//! assembly, and plot-ready CSV/JSON artifacts.
//!
//! Exit codes of the `spinheat` binary: 0 success, 1 validation failure,
//! 2 configuration or I/O error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod engine;
mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::CliError;
