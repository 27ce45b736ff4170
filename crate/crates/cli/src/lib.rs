//! Command-line front end: data loading, subcommands and JSON reports.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
