//! Command-line surface of `loopsplit`: run configuration, file emitters and the
//! acceptance harness behind `loopsplit verify`.

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;
pub mod harness;
pub mod lambda;

pub use commands::run;
pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{CliError, CliResult};
