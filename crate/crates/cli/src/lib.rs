//! Driver for recsys-evalkit experiments: preprocess, stats, split, run,
//! compare, simulate and trace, all configured by one TOML file.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod sidecar;

pub use commands::{cmd_compare, cmd_preprocess, cmd_run, cmd_simulate, cmd_split, cmd_stats, cmd_trace};
pub use config::ExperimentConfig;
pub use manifest::RunManifest;

/// Environment variable overriding the output root when `--out` is absent.
pub const OUT_ENV: &str = "RECSYS_EVALKIT_OUT";
