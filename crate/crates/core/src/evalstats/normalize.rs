use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub method: String,
    pub raw: f64,
    /// Best score among the methods on the same dataset.
    pub best: f64,
    pub ratio: f64,
}

/// Divides every method's score by the best score on the dataset.
pub fn normalize_scores(scores: &[(String, f64)]) -> Result<Vec<NormalizedScore>> {
    if scores.iter().any(|(_, s)| !s.is_finite() || *s < 0.0) {
        return Err(Error::domain("scores must be finite and non-negative"));
    }
    let best = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return Err(Error::domain(format!("best score must be positive, got {best}")));
    }
    Ok(scores
        .iter()
        .map(|(m, s)| NormalizedScore { method: m.clone(), raw: *s, best, ratio: if *s == best { 1.0 } else { s / best } })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn named(xs: &[f64]) -> Vec<(String, f64)> {
        xs.iter().enumerate().map(|(i, &x)| (format!("m{i}"), x)).collect()
    }

    #[test]
    fn als_relative_to_ease() {
        let r = normalize_scores(&[("ALS".into(), 0.424), ("Ease".into(), 0.467)]).unwrap();
        assert!((r[0].ratio - 0.908).abs() < 5e-4);
        assert_eq!(r[1].ratio, 1.0);
    }

    #[test]
    fn equal_and_invalid() {
        assert!(normalize_scores(&named(&[0.3, 0.3])).unwrap().iter().all(|n| n.ratio == 1.0));
        assert!(normalize_scores(&named(&[0.0, 0.0])).is_err());
        assert!(normalize_scores(&named(&[-0.1, 0.5])).is_err());
    }

    proptest! {
        #[test]
        fn scale_invariant(xs in proptest::collection::vec(0.01f64..1.0, 1..10), c in 0.1f64..100.0) {
            let a = normalize_scores(&named(&xs)).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let b = normalize_scores(&named(&scaled)).unwrap();
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p.ratio - q.ratio).abs() < 1e-12);
                prop_assert!(p.ratio > 0.0 && p.ratio <= 1.0);
            }
        }
    }
}
