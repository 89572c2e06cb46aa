//! Experiment runner for the reciprocity-calibration simulations: scenario
//! configuration, versioned CSV output and one runner per figure.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod runners;

pub use error::{AppError, AppResult};
