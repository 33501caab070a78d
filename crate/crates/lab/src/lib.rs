//! Experiment harness around `spectral-opt-core`: configuration, file
//! formats, parallel sweeps and the `spectral-opt` command-line tool.

pub mod commands;
pub mod config;
pub mod converge;
pub mod error;
pub mod matrix_io;
pub mod output;
pub mod sweep;

pub use config::Config;
pub use error::{LabError, Result};
