//! File formats, configuration, parallel execution and experiment drivers
//! around `pckl-core`.

pub mod commands;
pub mod config;
pub mod exec;
pub mod io;
pub mod manifest;

pub use commands::{run_command, Command, Overrides};
