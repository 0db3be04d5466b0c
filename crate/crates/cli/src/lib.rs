//! Command-line laboratory around `dnls-core`: run configuration, experiment
//! orchestration, persistence and the acceptance gate.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;

pub use error::{CliError, CliResult};
