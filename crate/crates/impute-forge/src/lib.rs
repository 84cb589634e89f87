//! Files, configuration, the HTTP backend and the subcommands behind the
//! `impute-forge` executable.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod http;
pub mod io;
pub mod manifest;

pub use config::RunConfig;
pub use error::CliError;
