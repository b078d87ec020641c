//! Random-walk item-item models on the bipartite user-item graph.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelFamily, ModelState};
use crate::hyperopt::Params;
use crate::linalg::{BinaryCsr, SparseRows};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphVariant {
    P3alpha,
    RP3beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub variant: GraphVariant,
    pub alpha: f64,
    /// Popularity penalty exponent; ignored by `P3alpha`.
    pub beta: f64,
    pub k: usize,
    pub normalize_similarity: bool,
}

/// Item-to-item transition weights through one user:
/// `W[i][j] = Σ_u (1/deg_i)^α (1/deg_u)^α`, divided by `deg_j^β` when `beta` is
/// non-zero. Includes the diagonal and is unpruned. Items without training
/// interactions have empty rows.
pub fn random_walk_weights(train: &BinaryCsr, alpha: f64, beta: f64) -> Vec<Vec<(u32, f64)>> {
    let n = train.n_cols();
    let t = train.transpose();
    let item_deg = t.row_degrees();
    let user_deg = train.row_degrees();
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], vec![false; n]),
            |(acc, seen), i| {
                if item_deg[i] == 0 {
                    return Vec::new();
                }
                let p_iu = (1.0 / item_deg[i] as f64).powf(alpha);
                let mut touched = Vec::new();
                for &u in t.row(i) {
                    let p_uj = (1.0 / user_deg[u as usize] as f64).powf(alpha);
                    for &j in train.row(u as usize) {
                        if !seen[j as usize] {
                            seen[j as usize] = true;
                            touched.push(j);
                        }
                        acc[j as usize] += p_iu * p_uj;
                    }
                }
                touched.sort_unstable();
                touched
                    .into_iter()
                    .map(|j| {
                        let mut v = std::mem::take(&mut acc[j as usize]);
                        seen[j as usize] = false;
                        if beta != 0.0 {
                            v /= (item_deg[j as usize] as f64).powf(beta);
                        }
                        (j, v)
                    })
                    .collect()
            },
        )
        .collect()
}

/// P3alpha / RP3beta: random-walk weights without self-loops, pruned to the
/// `k` largest per source item, optionally L1-normalized per row.
pub fn fit_graph_walk<T: Scalar>(train: &BinaryCsr, params: &GraphParams) -> Result<FittedModel<T>> {
    if params.k < 1 || !(params.alpha >= 0.0) || !(params.beta >= 0.0) {
        return Err(Error::domain(format!("invalid graph-walk parameters {params:?}")));
    }
    let beta = match params.variant {
        GraphVariant::P3alpha => 0.0,
        GraphVariant::RP3beta => params.beta,
    };
    let raw = random_walk_weights(train, params.alpha, beta);
    let rows: Vec<Vec<(u32, T)>> = raw
        .into_par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut row: Vec<(u32, f64)> = row.into_iter().filter(|&(j, _)| j as usize != i).collect();
            if row.len() > params.k {
                let cmp = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
                row.select_nth_unstable_by(params.k, cmp);
                row.truncate(params.k);
            }
            if params.normalize_similarity {
                let s: f64 = row.iter().map(|&(_, v)| v.abs()).sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|(_, v)| *v /= s);
                }
            }
            row.into_iter().map(|(j, v)| (j, T::of(v))).collect()
        })
        .collect();
    let family = match params.variant {
        GraphVariant::P3alpha => ModelFamily::P3alpha,
        GraphVariant::RP3beta => ModelFamily::RP3beta,
    };
    let w = SparseRows::from_rows(train.n_cols(), rows);
    Ok(FittedModel::new(family, Params::new(), 0, train, ModelState::SparseItemItem(w)))
}
