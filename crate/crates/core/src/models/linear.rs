//! Item-item linear models: SLIM (elastic net per item column) and Ease
//! (closed-form ridge with zero diagonal).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelFamily, ModelState};
use crate::hyperopt::Params;
use crate::linalg::{BinaryCsr, Cholesky, DenseMatrix, RowMatrix, SparseRows};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlimParams {
    pub l1: f64,
    pub l2: f64,
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub nonnegative: bool,
}

/// Sparse item co-occurrence `XᵀX`, diagonal included.
fn cooccurrence(train: &BinaryCsr) -> SparseRows<f64> {
    let n = train.n_cols();
    let t = train.transpose();
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |counts, i| {
                let mut touched = Vec::new();
                for &u in t.row(i) {
                    for &j in train.row(u as usize) {
                        if counts[j as usize] == 0 {
                            touched.push(j);
                        }
                        counts[j as usize] += 1;
                    }
                }
                touched.sort_unstable();
                touched.into_iter().map(|j| (j, std::mem::take(&mut counts[j as usize]) as f64)).collect()
            },
        )
        .collect();
    SparseRows::from_rows(n, rows)
}

/// Minimizes `½‖x_j - X w‖² + l1 ‖w‖₁ + ½ l2 ‖w‖²` with `w_j = 0` (and
/// `w ≥ 0` when requested) by cyclic coordinate descent on the Gram matrix.
/// `gw` is scratch of length `n_items`, zero on entry and on exit.
fn slim_column(g: &SparseRows<f64>, j: usize, params: &SlimParams, gw: &mut [f64]) -> (Vec<(u32, f64)>, bool) {
    let n = g.n_rows();
    let (g_idx, g_val) = g.row(j);
    let candidates: Vec<u32> = if params.nonnegative {
        // with G, w ≥ 0 a coordinate with G_ij = 0 can never leave zero
        g_idx.iter().copied().filter(|&i| i as usize != j).collect()
    } else {
        (0..n as u32).filter(|&i| i as usize != j).collect()
    };
    let target = |i: u32| g_idx.binary_search(&i).map_or(0.0, |p| g_val[p]);
    let mut w = vec![0.0f64; candidates.len()];
    let mut touched: Vec<u32> = Vec::new();
    let mut converged = false;
    for _ in 0..params.max_sweeps {
        let mut max_delta = 0.0f64;
        for (c, &i) in candidates.iter().enumerate() {
            let gii = g.get(i as usize, i);
            let rho = target(i) - gw[i as usize] + gii * w[c];
            let mut new = soft_threshold(rho, params.l1) / (gii + params.l2);
            if params.nonnegative {
                new = new.max(0.0);
            }
            if !new.is_finite() {
                new = 0.0;
            }
            let delta = new - w[c];
            if delta != 0.0 {
                let (idx, val) = g.row(i as usize);
                for (&m, &v) in idx.iter().zip(val) {
                    if gw[m as usize] == 0.0 {
                        touched.push(m);
                    }
                    gw[m as usize] += delta * v;
                }
                w[c] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < params.tolerance {
            converged = true;
            break;
        }
    }
    for m in touched {
        gw[m as usize] = 0.0;
    }
    let col = candidates.into_iter().zip(w).filter(|&(_, v)| v != 0.0).collect();
    (col, converged)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn fit_slim<T: Scalar>(train: &BinaryCsr, params: &SlimParams) -> Result<FittedModel<T>> {
    if !(params.l1 >= 0.0) || !(params.l2 >= 0.0) || params.max_sweeps == 0 {
        return Err(Error::domain(format!("invalid SLIM parameters {params:?}")));
    }
    let n = train.n_cols();
    let g = cooccurrence(train);
    let columns: Vec<(Vec<(u32, f64)>, bool)> = (0..n)
        .into_par_iter()
        .map_init(|| vec![0.0f64; n], |gw, j| slim_column(&g, j, params, gw))
        .collect();
    let unconverged = columns.iter().filter(|(_, ok)| !ok).count();
    if unconverged > 0 {
        log::warn!(
            "SLIM: {unconverged} of {n} columns hit {} sweeps before tolerance {}; keeping last iterate",
            params.max_sweeps,
            params.tolerance
        );
    }
    let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); n];
    for (j, (col, _)) in columns.into_iter().enumerate() {
        for (i, v) in col {
            rows[i as usize].push((j as u32, T::of(v)));
        }
    }
    let w = SparseRows::from_rows(n, rows);
    Ok(FittedModel::new(ModelFamily::SLIM, Params::new(), 0, train, ModelState::SparseItemItem(w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaseParams {
    pub lmbda: f64,
    pub memory_budget_bytes: u64,
}

/// Peak bytes of the dense Ease solve: Gram, factor and inverse.
pub fn ease_memory_bytes(n_items: usize, width: u8) -> u64 {
    3 * (n_items as u64).pow(2) * u64::from(width)
}

/// `P = (XᵀX + λI)⁻¹`, `B = I - P diag(1/diag P)`, so `B_ij = -P_ij / P_jj`
/// off the diagonal and `B_jj = 0`.
pub fn fit_ease<T: Scalar>(train: &BinaryCsr, params: &EaseParams) -> Result<FittedModel<T>> {
    if !(params.lmbda > 0.0) {
        return Err(Error::domain("Ease needs lmbda > 0"));
    }
    let n = train.n_cols();
    let need = ease_memory_bytes(n, T::WIDTH);
    if need > params.memory_budget_bytes {
        return Err(Error::Resource(format!(
            "Ease on {n} items needs about {need} bytes, budget is {}",
            params.memory_budget_bytes
        )));
    }
    let mut g: DenseMatrix<T> = <BinaryCsr as RowMatrix<T>>::gram(train);
    let lambda = T::of(params.lmbda);
    for i in 0..n {
        g[(i, i)] += lambda;
    }
    let p = Cholesky::factor(&g)?.inverse();
    drop(g);
    let diag: Vec<T> = (0..n).map(|j| p[(j, j)]).collect();
    let b = DenseMatrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { -p[(i, j)] / diag[j] });
    Ok(FittedModel::new(ModelFamily::Ease, Params::new(), 0, train, ModelState::DenseItemItem(b)))
}
