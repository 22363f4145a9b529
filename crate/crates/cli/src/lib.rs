//! Configuration, dispatch and serialization for the `wiretap` binary.

pub mod check;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_with, Command, ConfigFile, Format, Overrides, RunConfig};
pub use error::CliError;
pub use run::{emit, run, Outcome};
