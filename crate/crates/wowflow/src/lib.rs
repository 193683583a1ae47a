//! File formats, run manifests and the command-line driver around
//! [`wowflow_core`].

pub mod cli;
pub mod data_io;
pub mod manifest;

pub use cli::{run, CliError};
pub use wowflow_core as core;
