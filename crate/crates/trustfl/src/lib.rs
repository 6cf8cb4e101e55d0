//! Command-line front end for `trustfl-core`: TOML configuration, parallel
//! realizations, and CSV / JSON / SVG reports.

pub mod checks;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod runner;

pub use config::{emit_config, parse_config, parse_config_str, RunConfig};
pub use error::{CliError, Result};
pub use output::{emit_outputs, Formats, OutputBundle};
