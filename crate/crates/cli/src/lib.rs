//! Configuration, file formats and subcommands of the `corridor` tool.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{analyze, simulate, sweep, AnalyzeOptions, Overrides};
pub use config::ConfigFile;
