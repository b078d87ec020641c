//! Hyperparameter search spaces and the Bayesian, random and grid strategies.

mod bo;
mod grid;
mod search;
mod space;

pub use bo::{bo_suggest, bo_suggest_with, expected_improvement, matern52, BoConfig, GaussianProcess};
pub use grid::{grid_enumerate, grid_sizes};
pub use search::{
    average_curves, normalize_study, optimize, optimize_with, SearchTrace, Strategy, Trial, DEFAULT_BUDGET,
};
pub use space::{sample_random, ParamDomain, ParamValue, Params, SearchSpace};
