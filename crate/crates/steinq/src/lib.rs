//! File formats and command-line front end for `steinq-core`.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Config, ConfigError};
