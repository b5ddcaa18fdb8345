//! Configuration and experiment runners behind the `stirap` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{load, Experiment, RunConfig};
pub use error::CliError;
