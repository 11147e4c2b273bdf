//! Experiment harness for structured-regularization forecasting of
//! hierarchical time series: file formats, configs, multi-trial
//! benchmarks and the `hts-sr` command line.
//!
//! The numerical work lives in [`hts_sr_core`], re-exported as [`core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{Error, Result};
pub use hts_sr_core as core;
