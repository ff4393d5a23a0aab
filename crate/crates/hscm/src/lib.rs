//! File formats, configuration and command-line front end for `hscm-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod formats;
pub mod manifest;

pub use error::{AppError, Result};
