//! Forecasting two-level hierarchical time series with a structurally
//! regularized feedforward network.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and multi-trial orchestration live in the `hts-sr` crate.
//!
//! Module map:
//! - [`hierarchy`]: the tree, structure/summing matrices, aggregation
//! - [`panel`]: node-by-time panels, standardization, lagged inputs
//! - [`synthgen`]: AR(1)-factor synthetic benchmark panels
//! - [`baselines`]: moving average and exponential smoothing
//! - [`neuralnet`]: two-layer network and forward pass
//! - [`trainer`]: structured objective, backpropagation, gradient descent
//! - [`reconcile`]: bottom-up, top-down and MinT reconciliation
//! - [`evaluate`]: RMSE and level/trial aggregation
#![no_std]
// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod evaluate;
pub mod hierarchy;
pub mod matrix;
pub mod neuralnet;
pub mod panel;
pub mod reconcile;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use hierarchy::{Hierarchy, StructureMatrix, SummingMatrix};
pub use matrix::Matrix;
pub use neuralnet::{Activation, NetworkDims, NetworkParams};
pub use panel::SeriesPanel;
pub use trainer::{RegWeights, TrainConfig, TrainResult};
