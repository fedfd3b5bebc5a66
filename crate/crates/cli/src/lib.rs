//! Command-line harness: dataset generation, training, evaluation and the
//! analysis tools, driven by flags or a single JSON run config.

pub mod commands;
pub mod config;
pub mod error;
pub mod snapshot;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
