//! Configuration-driven sweeps, fits and schedule dumps on top of `kzquench`.

pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod manifest;
pub mod runner;

pub use commands::{run, Command, CommandOutput};
pub use config::{Overrides, RunConfig};
pub use error::CliError;
