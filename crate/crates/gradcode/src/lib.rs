//! File formats, run configuration and the command-line front end for
//! [`gradcode_core`].
//!
//! Scheme and plan files are JSON documents (see [`scheme`]); run configs
//! are JSON as well (see [`config`]); results are written as CSV
//! (see [`report`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod scheme;
pub mod shared;

pub use error::{CliError, CliResult};
pub use shared::SharedDecodeCache;
