//! Experiment drivers for the regime-switching dividend learner: configuration, file
//! output and the `simulate`, `estimate`, `fd`, `train` and `evaluate` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
