//! Latent-factor models: PureSVD and implicit-feedback ALS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelFamily, ModelState};
use crate::hyperopt::Params;
use crate::linalg::{dot, truncated_svd, BinaryCsr, Cholesky, DenseMatrix, SvdMethod};
use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdParams {
    pub n_factors: usize,
    pub exact_max_items: usize,
    pub oversampling: usize,
    pub power_iterations: usize,
}

/// Truncated SVD `X ≈ U Σ Vᵀ`; stores `V` and scores `x V Vᵀ`.
pub fn fit_puresvd<T: Scalar>(train: &BinaryCsr, params: &SvdParams, seed: u64) -> Result<FittedModel<T>> {
    if params.n_factors == 0 {
        return Err(Error::domain("n_factors must be positive"));
    }
    let max_rank = train.n_rows().min(train.n_cols());
    let rank = if params.n_factors > max_rank {
        log::warn!("PureSVD: n_factors {} exceeds min(users, items) = {max_rank}; capped", params.n_factors);
        max_rank
    } else {
        params.n_factors
    };
    let method = if train.n_cols() <= params.exact_max_items {
        SvdMethod::Exact
    } else {
        SvdMethod::Randomized {
            oversampling: params.oversampling,
            power_iterations: params.power_iterations,
            seed: derive_seed(seed, &[b"puresvd"]),
        }
    };
    let svd = truncated_svd::<T, _>(train, rank, method)?;
    Ok(FittedModel::new(ModelFamily::PureSVD, Params::new(), seed, train, ModelState::Projection(svd.v)))
}

pub(super) fn score_projection<T: Scalar>(v: &DenseMatrix<T>, fold_in: &[u32]) -> Vec<T> {
    let mut z = vec![T::zero(); v.cols()];
    for &i in fold_in {
        for (a, &b) in z.iter_mut().zip(v.row(i as usize)) {
            *a += b;
        }
    }
    v.matvec(&z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsParams {
    pub n_factors: usize,
    pub regularization: f64,
    /// `w` in the confidence `c = 1 + w x`.
    pub confidence: f64,
    pub iterations: usize,
}

/// Objective value after initialization and after every half-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsTrace {
    pub objective: Vec<f64>,
}

/// Weighted implicit-feedback objective
/// `Σ_{u,i} c_ui (p_ui - x_uᵀ y_i)² + λ (‖X‖² + ‖Y‖²)` with `c = 1 + w p`.
pub fn als_objective<T: Scalar>(
    train: &BinaryCsr,
    users: &DenseMatrix<T>,
    items: &DenseMatrix<T>,
    regularization: f64,
    confidence: f64,
) -> f64 {
    let gram = items.tmatmul(items);
    let mut total = 0.0f64;
    for u in 0..train.n_rows() {
        let xu = users.row(u);
        let gx = gram.matvec(xu);
        total += dot(xu, &gx).as_f64();
        for &i in train.row(u) {
            let s = dot(xu, items.row(i as usize)).as_f64();
            total += (1.0 + confidence) * (1.0 - s) * (1.0 - s) - s * s;
        }
    }
    let norm = |m: &DenseMatrix<T>| m.frobenius_sq().as_f64();
    total + regularization * (norm(users) + norm(items))
}

/// Solves every row of `side` against the fixed factors `other`:
/// `(OᵀO + λI + w Σ_{i∈row} o_i o_iᵀ) x = (1 + w) Σ_{i∈row} o_i`.
fn solve_side<T: Scalar>(side: &BinaryCsr, other: &DenseMatrix<T>, reg: T, conf: T) -> Result<DenseMatrix<T>> {
    let f = other.cols();
    let gram = other.tmatmul(other);
    let rows: Vec<Vec<T>> = (0..side.n_rows())
        .into_par_iter()
        .map(|r| ridge_solve(&gram, other, side.row(r), reg, conf))
        .collect::<Result<_>>()?;
    Ok(DenseMatrix::from_vec(side.n_rows(), f, rows.concat()))
}

fn ridge_solve<T: Scalar>(gram: &DenseMatrix<T>, other: &DenseMatrix<T>, support: &[u32], reg: T, conf: T) -> Result<Vec<T>> {
    let f = other.cols();
    if support.is_empty() {
        return Ok(vec![T::zero(); f]);
    }
    let mut a = gram.clone();
    let mut b = vec![T::zero(); f];
    for &i in support {
        let y = other.row(i as usize);
        for p in 0..f {
            let cp = conf * y[p];
            b[p] += y[p];
            for (q, &yq) in y.iter().enumerate() {
                a[(p, q)] += cp * yq;
            }
        }
    }
    for p in 0..f {
        a[(p, p)] += reg;
        b[p] *= T::one() + conf;
    }
    let chol = Cholesky::factor(&a).map_err(|e| {
        Error::Numerical(format!("ALS ridge system (n_factors={f}, regularization={reg}) not positive definite: {e}"))
    })?;
    Ok(chol.solve(&b))
}

pub fn fit_als<T: Scalar>(train: &BinaryCsr, params: &AlsParams, seed: u64) -> Result<FittedModel<T>> {
    fit_als_traced(train, params, seed).map(|(m, _)| m)
}

/// ALS with the objective recorded after every half-sweep.
pub fn fit_als_traced<T: Scalar>(train: &BinaryCsr, params: &AlsParams, seed: u64) -> Result<(FittedModel<T>, AlsTrace)> {
    if params.n_factors == 0 || !(params.regularization > 0.0) || !(params.confidence >= 0.0) {
        return Err(Error::domain(format!("invalid ALS parameters {params:?}")));
    }
    let max_rank = train.n_rows().min(train.n_cols()).max(1);
    let f = if params.n_factors > max_rank {
        log::warn!("ALS: n_factors {} exceeds min(users, items) = {max_rank}; capped", params.n_factors);
        max_rank
    } else {
        params.n_factors
    };
    let (reg, conf) = (T::of(params.regularization), T::of(params.confidence));
    let mut rng = SeedStream::new(derive_seed(seed, &[b"als-init"]));
    let mut items = DenseMatrix::from_fn(train.n_cols(), f, |_, _| T::of(0.01 * rng.normal()));
    let mut users = DenseMatrix::zeros(train.n_rows(), f);
    let t = train.transpose();
    let mut objective = vec![als_objective(train, &users, &items, params.regularization, params.confidence)];
    for _ in 0..params.iterations {
        users = solve_side(train, &items, reg, conf)?;
        objective.push(als_objective(train, &users, &items, params.regularization, params.confidence));
        items = solve_side(&t, &users, reg, conf)?;
        objective.push(als_objective(train, &users, &items, params.regularization, params.confidence));
    }
    let gram = items.tmatmul(&items);
    let state = ModelState::WeightedFactors { y: items, gram, regularization: reg, confidence: conf };
    let model = FittedModel::new(ModelFamily::ALS, Params::new(), seed, train, state);
    Ok((model, AlsTrace { objective }))
}

pub(super) fn score_fold_in<T: Scalar>(
    y: &DenseMatrix<T>,
    gram: &DenseMatrix<T>,
    reg: T,
    conf: T,
    fold_in: &[u32],
) -> Result<Vec<T>> {
    let u = ridge_solve(gram, y, fold_in, reg, conf)?;
    Ok(y.matvec(&u))
}
