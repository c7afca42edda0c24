//! Command line, parallel ensembles and file formats around `noisetube_core`.

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod setup;

pub use error::{CliError, CliResult};
