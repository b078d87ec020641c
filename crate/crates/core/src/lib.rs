//! Evaluation toolkit for top-n recommenders on implicit feedback under
//! strong generalization: data preparation, user-inductive splits, ranking
//! metrics, baseline models, hyperparameter search and statistics.

// NaN-rejecting `!(x > 0.0)` checks and index loops over dense buffers are intended
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod evalstats;
pub mod hyperopt;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod splitting;
mod error;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FittedModel32 = models::FittedModel<f32>;
pub type FittedModel64 = models::FittedModel<f64>;
pub type DenseMatrix32 = linalg::DenseMatrix<f32>;
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;
pub type NestedCvResult32 = evalstats::NestedCvResult<f32>;
pub type NestedCvResult64 = evalstats::NestedCvResult<f64>;
