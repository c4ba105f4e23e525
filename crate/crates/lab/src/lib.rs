//! Command-line laboratory on top of `anderson-lab-core`: TOML experiment
//! files, a thread-pool executor, CSV/JSON emission and the `anderson-lab`
//! binary's subcommands.

pub mod cli;
pub mod config;
pub mod emit;
pub mod error;
pub mod exec;

pub use cli::run;
pub use error::LabError;
