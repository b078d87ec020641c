use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Discordant-pair total up to which the exact binomial test is used.
pub const EXACT_MAX_DISCORDANT: u64 = 25;
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(b, c)` for the exact test, the corrected chi-square otherwise.
    pub statistic: f64,
    pub p_value: f64,
    /// Users where only the first system hit.
    pub b: u64,
    /// Users where only the second system hit.
    pub c: u64,
    pub method: McNemarMethod,
    pub alpha: f64,
    pub significant: bool,
    /// No discordant pairs; the p-value is 1 by convention.
    pub degenerate: bool,
}

/// `P(X ≤ x)` for `X ~ Binomial(n, 1/2)`, exact for `n ≤ 1000`.
pub fn binomial_half_cdf(x: u64, n: u64) -> f64 {
    let mut term = 1.0f64; // C(n, 0)
    let mut sum = 1.0f64;
    for i in 1..=x.min(n) {
        term = term * (n - i + 1) as f64 / i as f64;
        sum += term;
    }
    sum * 0.5f64.powi(n as i32)
}

/// Two-sided McNemar test on paired per-user binary outcomes.
pub fn mcnemar_test(hits_a: &[bool], hits_b: &[bool], alpha: f64) -> Result<TestResult> {
    if hits_a.len() != hits_b.len() {
        return Err(Error::Contract(format!("paired outcomes differ in length: {} vs {}", hits_a.len(), hits_b.len())));
    }
    let b = hits_a.iter().zip(hits_b).filter(|&(&x, &y)| x && !y).count() as u64;
    let c = hits_a.iter().zip(hits_b).filter(|&(&x, &y)| !x && y).count() as u64;
    Ok(mcnemar_from_counts(b, c, alpha))
}

pub fn mcnemar_from_counts(b: u64, c: u64, alpha: f64) -> TestResult {
    let n = b + c;
    let (statistic, p_value, method) = if n <= EXACT_MAX_DISCORDANT {
        let k = b.min(c);
        (k as f64, (2.0 * binomial_half_cdf(k, n)).min(1.0), McNemarMethod::ExactBinomial)
    } else {
        let d = (b as f64 - c as f64).abs() - 1.0;
        let stat = d * d / n as f64;
        let chi = ChiSquared::new(1.0).expect("one degree of freedom");
        (stat, chi.sf(stat).clamp(0.0, 1.0), McNemarMethod::ChiSquareCorrected)
    };
    let degenerate = n == 0;
    let p_value = if degenerate { 1.0 } else { p_value };
    TestResult { statistic, p_value, b, c, method, alpha, significant: p_value < alpha, degenerate }
}

/// Reads 0/1 metric values (HitRate with one test item) as booleans.
pub fn binary_outcomes(scores: &[f64]) -> Result<Vec<bool>> {
    scores
        .iter()
        .map(|&s| match s {
            0.0 => Ok(false),
            1.0 => Ok(true),
            x => Err(Error::Contract(format!("McNemar needs binary per-user outcomes, got {x}"))),
        })
        .collect()
}
