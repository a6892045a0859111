//! Command-line harness: configuration, run records, subcommands and the
//! verification suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod record;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use record::{Check, CommandSpec, Output, RunRecord, Suite};
