//! File formats, experiment configuration and the subcommands behind the
//! `tripath` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod idx;
pub mod manifest;
pub mod pgm;
pub mod report;
pub mod threads;

pub use commands::{Layout, Progress, RunOptions};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
