//! Batch front end for the time-series clustering library: synthetic data
//! generation, the distance-significance group experiment, pipeline
//! comparison with the combined performance index, and per-cluster reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod pipeline;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
