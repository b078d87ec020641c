//! Nested cross-validation, bootstrap intervals, McNemar tests, score
//! normalization and the split-by-ratio simulator.

mod bootstrap;
mod mcnemar;
mod nested;
mod normalize;
mod report;
mod simulate;

pub use bootstrap::{bootstrap_ci, quantile_sorted, ConfidenceInterval, DEFAULT_RESAMPLES, MIN_RESAMPLES};
pub use mcnemar::{
    binary_outcomes, binomial_half_cdf, mcnemar_from_counts, mcnemar_test, McNemarMethod, TestResult, DEFAULT_ALPHA,
    EXACT_MAX_DISCORDANT,
};
pub use nested::{evaluate_users, nested_cv, FoldOutcome, FoldScores, NestedCvConfig, NestedCvResult, Target};
pub use normalize::{normalize_scores, NormalizedScore};
pub use report::{
    ci_verdict, compare_reports, round_significant, CiSettings, Comparison, EvalReport, FoldReport, FoldTest, Verdict,
};
pub use simulate::{simulate_split_by_ratio, SimulationConfig, SimulationRow, SimulationTable};
