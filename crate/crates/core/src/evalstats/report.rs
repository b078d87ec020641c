use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, mcnemar_test, binary_outcomes, ConfidenceInterval, NestedCvResult, TestResult};
use crate::hyperopt::Params;
use crate::metrics::MetricSpec;
use crate::models::ModelFamily;
use crate::{Error, Result};

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    let r = (x * scale).round() / scale;
    // reparse to drop representation noise such as 0.30000000000000004
    format!("{r:.*e}", (digits - 1) as usize).parse().unwrap_or(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub best_params: Params,
    pub best_validation: Option<f64>,
    pub n_users: usize,
    pub skipped_users: usize,
    pub cold_start_users: usize,
    pub users: Vec<usize>,
    /// Primary-metric value per user, aligned with `users`.
    pub user_scores: Vec<f64>,
}

/// Result of one nested cross-validation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub dataset_digest: String,
    pub model: ModelFamily,
    pub metric: MetricSpec,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Bootstrap over the fold means.
    pub ci: ConfidenceInterval,
    /// Bootstrap over all test users pooled, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_ci: Option<ConfidenceInterval>,
    /// Fold means of the additional report metrics.
    #[serde(default)]
    pub report_metrics: BTreeMap<String, Vec<f64>>,
    pub folds: Vec<FoldReport>,
    pub config_digest: String,
    pub toolkit_version: String,
}

/// Interval settings for a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSettings {
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub per_user: bool,
}

impl EvalReport {
    /// Builds a report with full-precision values.
    pub fn from_result<T>(
        result: &NestedCvResult<T>,
        dataset: &str,
        dataset_digest: &str,
        config_digest: &str,
        ci: &CiSettings,
    ) -> Result<Self> {
        let primary = result.primary();
        let interval = bootstrap_ci(&primary.scores, ci.level, ci.n_resamples, ci.seed)?;
        let per_user_ci = if ci.per_user {
            Some(bootstrap_ci(&primary.pooled(), ci.level, ci.n_resamples, ci.seed)?)
        } else {
            None
        };
        let report_metrics = result.metrics[1..]
            .iter()
            .map(|m| (m.to_string(), result.fold_scores(m).expect("evaluated metric").scores))
            .collect();
        let folds = result
            .folds
            .iter()
            .map(|f| FoldReport {
                fold: f.fold,
                best_params: f.best_params.clone(),
                best_validation: f.trace.best_objective(),
                n_users: f.users.len(),
                skipped_users: f.skipped_users,
                cold_start_users: f.cold_start_users,
                users: f.users.clone(),
                user_scores: f.user_scores[0].clone(),
            })
            .collect();
        Ok(Self {
            dataset: dataset.to_string(),
            dataset_digest: dataset_digest.to_string(),
            model: result.family,
            metric: primary.metric,
            mean: primary.mean(),
            fold_scores: primary.scores,
            ci: interval,
            per_user_ci,
            report_metrics,
            folds,
            config_digest: config_digest.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Copy with every reported number rounded to `digits` significant digits.
    pub fn rounded(&self, digits: i32) -> Self {
        let r = |x: f64| round_significant(x, digits);
        let rv = |xs: &[f64]| xs.iter().map(|&x| r(x)).collect::<Vec<_>>();
        let rci = |c: &ConfidenceInterval| ConfidenceInterval { lo: r(c.lo), hi: r(c.hi), ..c.clone() };
        let mut out = self.clone();
        out.fold_scores = rv(&self.fold_scores);
        out.mean = r(self.mean);
        out.ci = rci(&self.ci);
        out.per_user_ci = self.per_user_ci.as_ref().map(rci);
        out.report_metrics = self.report_metrics.iter().map(|(k, v)| (k.clone(), rv(v))).collect();
        for f in &mut out.folds {
            f.user_scores = rv(&f.user_scores);
            f.best_validation = f.best_validation.map(r);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The confidence intervals intersect.
    NotSeparable,
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldTest {
    pub fold: usize,
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model_a: ModelFamily,
    pub model_b: ModelFamily,
    pub metric: MetricSpec,
    pub dataset_digest: String,
    pub ci_a: ConfidenceInterval,
    pub ci_b: ConfidenceInterval,
    pub verdict: Verdict,
    /// McNemar per fold, present when per-user scores are binary.
    pub fold_tests: Vec<FoldTest>,
    /// McNemar over the users of all folds.
    pub pooled_test: Option<TestResult>,
}

pub fn ci_verdict(a: &ConfidenceInterval, b: &ConfidenceInterval) -> Verdict {
    if a.overlaps(b) {
        Verdict::NotSeparable
    } else {
        Verdict::Separable
    }
}

/// Pairs two reports on the same dataset, split and metric.
pub fn compare_reports(a: &EvalReport, b: &EvalReport, alpha: f64) -> Result<Comparison> {
    if a.dataset_digest != b.dataset_digest {
        return Err(Error::Contract("reports were computed on different datasets".into()));
    }
    if a.metric != b.metric {
        return Err(Error::Contract(format!("reports use different metrics: {} vs {}", a.metric, b.metric)));
    }
    if a.folds.len() != b.folds.len() || a.folds.iter().zip(&b.folds).any(|(x, y)| x.users != y.users) {
        return Err(Error::Contract("reports do not share the same folds and users".into()));
    }
    let binary: Option<Vec<(Vec<bool>, Vec<bool>)>> = a
        .folds
        .iter()
        .zip(&b.folds)
        .map(|(x, y)| Some((binary_outcomes(&x.user_scores).ok()?, binary_outcomes(&y.user_scores).ok()?)))
        .collect();
    let (fold_tests, pooled_test) = match binary {
        Some(pairs) => {
            let tests = pairs
                .iter()
                .zip(&a.folds)
                .map(|((x, y), f)| Ok(FoldTest { fold: f.fold, test: mcnemar_test(x, y, alpha)? }))
                .collect::<Result<Vec<_>>>()?;
            let all_a: Vec<bool> = pairs.iter().flat_map(|p| p.0.iter().copied()).collect();
            let all_b: Vec<bool> = pairs.iter().flat_map(|p| p.1.iter().copied()).collect();
            (tests, Some(mcnemar_test(&all_a, &all_b, alpha)?))
        }
        None => {
            log::warn!("per-user scores are not binary; skipping McNemar tests");
            (Vec::new(), None)
        }
    };
    Ok(Comparison {
        model_a: a.model,
        model_b: b.model,
        metric: a.metric,
        dataset_digest: a.dataset_digest.clone(),
        ci_a: a.ci.clone(),
        ci_b: b.ci.clone(),
        verdict: ci_verdict(&a.ci, &b.ci),
        fold_tests,
        pooled_test,
    })
}
