pub mod commands;
pub mod config;
pub mod error;
pub mod presets;

pub use error::{CliError, CliResult};
