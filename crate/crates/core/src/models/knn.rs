use std::cmp::Ordering;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelFamily, ModelState};
use crate::hyperopt::Params;
use crate::linalg::{BinaryCsr, SparseRows};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each neighbor contributes 1.
    Uniform,
    /// Each neighbor contributes its similarity.
    Similarity,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "similarity" => Ok(Weighting::Similarity),
            _ => Err(Error::domain(format!("unknown weighting {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub weighting: Weighting,
    pub k: usize,
    pub lambda: f64,
    pub alpha: f64,
}

impl KnnParams {
    fn check(&self) -> Result<()> {
        if self.k < 1 || !(self.lambda >= 0.0) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!("invalid KNN parameters {self:?}")));
        }
        Ok(())
    }
}

/// `⟨x,y⟩ / (‖x‖^{2α} ‖y‖^{2(1-α)} + λ)` from the inner product and squared norms.
pub fn asymmetric_cosine(dot: f64, norm_sq_x: f64, norm_sq_y: f64, alpha: f64, lambda: f64) -> f64 {
    let denom = norm_sq_x.powf(alpha) * norm_sq_y.powf(1.0 - alpha) + lambda;
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Best `k` by descending similarity, ties to the lower index.
fn top_k(mut cand: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
    let cmp = |a: &(u32, f64), b: &(u32, f64)| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0));
    if cand.len() > k {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand
}

/// Overlap counts of `support` with every row of `x`, found through its
/// transpose `x_t`. Returns `(row, count)` for rows with overlap.
fn overlaps(x_t: &BinaryCsr, support: &[u32], counts: &mut [u32]) -> Vec<(u32, u32)> {
    let mut touched = Vec::new();
    for &i in support {
        for &r in x_t.row(i as usize) {
            if counts[r as usize] == 0 {
                touched.push(r);
            }
            counts[r as usize] += 1;
        }
    }
    touched
        .into_iter()
        .map(|r| {
            let c = counts[r as usize];
            counts[r as usize] = 0;
            (r, c)
        })
        .collect()
}

/// Item-based KNN. For each target item the `k` most similar other items are
/// kept; the stored matrix is keyed by source item so that scoring is `x W`.
pub fn fit_item_knn<T: Scalar>(train: &BinaryCsr, params: &KnnParams) -> Result<FittedModel<T>> {
    params.check()?;
    let n = train.n_cols();
    let t = train.transpose();
    let deg = t.row_degrees();
    let columns: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |counts, j| {
                let mut touched = Vec::new();
                for &u in t.row(j) {
                    for &i in train.row(u as usize) {
                        if i as usize == j {
                            continue;
                        }
                        if counts[i as usize] == 0 {
                            touched.push(i);
                        }
                        counts[i as usize] += 1;
                    }
                }
                let cand: Vec<(u32, f64)> = touched
                    .into_iter()
                    .map(|i| {
                        let c = std::mem::take(&mut counts[i as usize]);
                        let s = asymmetric_cosine(c as f64, deg[j] as f64, deg[i as usize] as f64, params.alpha, params.lambda);
                        (i, s)
                    })
                    .collect();
                top_k(cand, params.k)
            },
        )
        .collect();
    let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); n];
    for (j, col) in columns.into_iter().enumerate() {
        for (i, s) in col {
            let w = match params.weighting {
                Weighting::Similarity => s,
                Weighting::Uniform => 1.0,
            };
            rows[i as usize].push((j as u32, T::of(w)));
        }
    }
    let w = SparseRows::from_rows(n, rows);
    Ok(FittedModel::new(ModelFamily::ItemKNN, Params::new(), 0, train, ModelState::SparseItemItem(w)))
}

/// User-based KNN: stores the training matrix; neighbors are found per fold-in.
pub fn fit_user_knn<T: Scalar>(train: &BinaryCsr, params: &KnnParams) -> Result<FittedModel<T>> {
    params.check()?;
    let state = ModelState::UserNeighbors { train: train.clone(), train_t: train.transpose(), params: *params };
    Ok(FittedModel::new(ModelFamily::UserKNN, Params::new(), 0, train, state))
}

pub(super) fn score_user_knn<T: Scalar>(train: &BinaryCsr, train_t: &BinaryCsr, params: &KnnParams, fold_in: &[u32]) -> Vec<T> {
    let mut counts = vec![0u32; train.n_rows()];
    let m = fold_in.len() as f64;
    let cand: Vec<(u32, f64)> = overlaps(train_t, fold_in, &mut counts)
        .into_iter()
        .map(|(u, c)| {
            let deg = train.row(u as usize).len() as f64;
            (u, asymmetric_cosine(c as f64, m, deg, params.alpha, params.lambda))
        })
        .collect();
    let mut out = vec![T::zero(); train.n_cols()];
    for (u, s) in top_k(cand, params.k) {
        let w = T::of(match params.weighting {
            Weighting::Similarity => s,
            Weighting::Uniform => 1.0,
        });
        for &j in train.row(u as usize) {
            out[j as usize] += w;
        }
    }
    out
}
