use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 1000;
const BLOCK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub method: String,
}

impl ConfidenceInterval {
    pub fn overlaps(&self, other: &ConfidenceInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Mean computed around the first value, so equal inputs give that value exactly.
fn shifted_mean(xs: impl Iterator<Item = f64> + Clone, first: f64, n: usize) -> f64 {
    first + xs.map(|x| x - first).sum::<f64>() / n as f64
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap of the mean: resample `scores` with replacement
/// `n_resamples` times and report the central `level` quantile range of the
/// resample means. Resamples are drawn in blocks of 1000 with per-block
/// seeds, so the result is independent of the thread count.
pub fn bootstrap_ci(scores: &[f64], level: f64, n_resamples: usize, seed: u64) -> Result<ConfidenceInterval> {
    if scores.len() < 2 {
        return Err(Error::domain(format!("bootstrap needs at least 2 scores, got {}", scores.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level {level} outside (0, 1)")));
    }
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::domain(format!("need at least {MIN_RESAMPLES} resamples, got {n_resamples}")));
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("bootstrap scores must be finite"));
    }
    let n = scores.len();
    let first = scores[0];
    let n_blocks = n_resamples.div_ceil(BLOCK);
    let mut means: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = SeedStream::new(derive_seed(seed, &[b"bootstrap", &(b as u64).to_le_bytes()]));
            let count = BLOCK.min(n_resamples - b * BLOCK);
            let mut idx = vec![0usize; n];
            (0..count)
                .map(|_| {
                    idx.iter_mut().for_each(|i| *i = rng.below(n as u64) as usize);
                    shifted_mean(idx.iter().map(|&i| scores[i]), first, n)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let (min, max) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        level,
        lo: quantile_sorted(&means, tail).clamp(min, max),
        hi: quantile_sorted(&means, 1.0 - tail).clamp(min, max),
        n_resamples,
        seed,
        method: "percentile".into(),
    })
}
