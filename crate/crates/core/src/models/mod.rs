//! The ten user-inductive baselines.
//!
//! Every model is fit on a training matrix and then scores unseen users from
//! their fold-in items alone. Scores are returned for every item; masking the
//! fold-in is the caller's job.

mod factor;
mod graph;
mod io;
mod knn;
mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use factor::{als_objective, fit_als, fit_als_traced, fit_puresvd, AlsParams, AlsTrace, SvdParams};
pub use graph::{fit_graph_walk, random_walk_weights, GraphParams, GraphVariant};
pub use io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use knn::{asymmetric_cosine, fit_item_knn, fit_user_knn, KnnParams, Weighting};
pub use linear::{fit_ease, fit_slim, ease_memory_bytes, EaseParams, SlimParams};

use crate::data::InteractionDataset;
use crate::hyperopt::{ParamDomain, ParamValue, Params, SearchSpace};
use crate::linalg::{BinaryCsr, DenseMatrix, SparseRows};
use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelFamily {
    Random,
    Popularity,
    UserKNN,
    ItemKNN,
    P3alpha,
    RP3beta,
    PureSVD,
    ALS,
    SLIM,
    Ease,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 10] = [
        ModelFamily::Random,
        ModelFamily::Popularity,
        ModelFamily::UserKNN,
        ModelFamily::ItemKNN,
        ModelFamily::P3alpha,
        ModelFamily::RP3beta,
        ModelFamily::PureSVD,
        ModelFamily::ALS,
        ModelFamily::SLIM,
        ModelFamily::Ease,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Random => "Random",
            ModelFamily::Popularity => "Popularity",
            ModelFamily::UserKNN => "UserKNN",
            ModelFamily::ItemKNN => "ItemKNN",
            ModelFamily::P3alpha => "P3alpha",
            ModelFamily::RP3beta => "RP3beta",
            ModelFamily::PureSVD => "PureSVD",
            ModelFamily::ALS => "ALS",
            ModelFamily::SLIM => "SLIM",
            ModelFamily::Ease => "Ease",
        }
    }

    /// The hyperparameter space searched for this family.
    pub fn search_space(self) -> SearchSpace {
        use ParamDomain::*;
        let cont = |lo, hi| Continuous { lo, hi };
        let log = |lo, hi| LogContinuous { lo, hi };
        let normalize = Categorical { values: vec![ParamValue::Bool(true), ParamValue::Bool(false)] };
        let dims: Vec<(&str, ParamDomain)> = match self {
            ModelFamily::Random | ModelFamily::Popularity => vec![],
            ModelFamily::ALS => vec![("n_factors", Discrete { lo: 16, hi: 512 }), ("regularization", cont(1e-6, 200.0))],
            ModelFamily::Ease => vec![("lmbda", cont(1.0, 1000.0))],
            ModelFamily::P3alpha => {
                vec![("normalize_similarity", normalize), ("alpha", cont(0.0, 2.0)), ("k", Discrete { lo: 5, hi: 1000 })]
            }
            ModelFamily::PureSVD => vec![("n_factors", Discrete { lo: 16, hi: 512 })],
            ModelFamily::RP3beta => vec![
                ("normalize_similarity", normalize),
                ("alpha", cont(0.0, 2.0)),
                ("beta", cont(0.0, 2.0)),
                ("k", Discrete { lo: 5, hi: 1000 }),
            ],
            ModelFamily::SLIM => vec![("l1", log(0.1, 10000.0)), ("l2", log(0.1, 10000.0))],
            ModelFamily::UserKNN | ModelFamily::ItemKNN => vec![
                ("weighting", Categorical { values: vec!["uniform".into(), "similarity".into()] }),
                ("k", Discrete { lo: 1, hi: 500 }),
                ("lambda", log(0.1, 1000.0)),
                ("alpha", cont(0.1, 0.9)),
            ],
        };
        SearchSpace::new(dims.into_iter().map(|(n, d)| (n.to_string(), d)).collect())
            .expect("built-in spaces are valid")
    }

    /// Values used for parameters a spec leaves unset.
    pub fn default_params(self) -> Params {
        let pairs: Vec<(&str, ParamValue)> = match self {
            ModelFamily::Random | ModelFamily::Popularity => vec![],
            ModelFamily::UserKNN | ModelFamily::ItemKNN => vec![
                ("weighting", "similarity".into()),
                ("k", 100i64.into()),
                ("lambda", 1.0.into()),
                ("alpha", 0.5.into()),
            ],
            ModelFamily::P3alpha => {
                vec![("normalize_similarity", false.into()), ("alpha", 1.0.into()), ("k", 200i64.into())]
            }
            ModelFamily::RP3beta => vec![
                ("normalize_similarity", false.into()),
                ("alpha", 1.0.into()),
                ("beta", 0.5.into()),
                ("k", 200i64.into()),
            ],
            ModelFamily::PureSVD => vec![("n_factors", 64i64.into())],
            ModelFamily::ALS => vec![("n_factors", 64i64.into()), ("regularization", 1.0.into())],
            ModelFamily::SLIM => vec![("l1", 1.0.into()), ("l2", 10.0.into())],
            ModelFamily::Ease => vec![("lmbda", 500.0.into())],
        };
        pairs.into_iter().map(|(n, v)| (n.to_string(), v)).collect()
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown model family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub params: Params,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, params: Params, seed: u64) -> Self {
        Self { family, params, seed }
    }

    /// Defaults overlaid with the explicit params, validated against the
    /// family's search space.
    pub fn resolved_params(&self) -> Result<Params> {
        self.resolved_params_in(&self.family.search_space())
    }

    /// As [`resolved_params`](Self::resolved_params), validated against an
    /// overridden space instead.
    pub fn resolved_params_in(&self, space: &SearchSpace) -> Result<Params> {
        let mut p = self.family.default_params();
        p.extend(self.params.clone());
        space.validate_params(&p)?;
        Ok(p)
    }
}

/// Solver settings that are not searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// ALS confidence weight `w` in `c = 1 + w x`.
    pub als_confidence: f64,
    pub als_iterations: usize,
    pub slim_tolerance: f64,
    pub slim_max_sweeps: usize,
    pub slim_nonnegative: bool,
    /// Use the exact SVD up to this many items, randomized beyond.
    pub svd_exact_max_items: usize,
    pub svd_oversampling: usize,
    pub svd_power_iterations: usize,
    /// Upper bound on dense item-item allocations, in bytes.
    pub memory_budget_bytes: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            als_confidence: 1.0,
            als_iterations: 15,
            slim_tolerance: 1e-4,
            slim_max_sweeps: 100,
            slim_nonnegative: true,
            svd_exact_max_items: 2000,
            svd_oversampling: 10,
            svd_power_iterations: 2,
            memory_budget_bytes: 8 << 30,
        }
    }
}

/// Learned state of a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelState<T> {
    Random,
    Popularity,
    /// Item-item weights keyed by source item; score = `x W`.
    SparseItemItem(SparseRows<T>),
    /// Dense item-item weights; score = `x B`.
    DenseItemItem(DenseMatrix<T>),
    /// Neighbors are found among the training users at scoring time.
    UserNeighbors { train: BinaryCsr, train_t: BinaryCsr, params: KnnParams },
    /// Orthonormal item factors `V`; score = `x V Vᵀ`.
    Projection(DenseMatrix<T>),
    /// Item factors `Y` with their Gram matrix; fold-in solves a ridge system.
    WeightedFactors { y: DenseMatrix<T>, gram: DenseMatrix<T>, regularization: T, confidence: T },
}

impl<T> ModelState<T> {
    fn tag(&self) -> &'static str {
        match self {
            ModelState::Random => "random",
            ModelState::Popularity => "popularity",
            ModelState::SparseItemItem(_) => "sparse_item_item",
            ModelState::DenseItemItem(_) => "dense_item_item",
            ModelState::UserNeighbors { .. } => "user_neighbors",
            ModelState::Projection(_) => "projection",
            ModelState::WeightedFactors { .. } => "weighted_factors",
        }
    }
}

/// An immutable scorer for unseen users.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    pub(crate) family: ModelFamily,
    pub(crate) params: Params,
    pub(crate) seed: u64,
    pub(crate) n_items: usize,
    /// Training interaction count per item; the cold-start fallback.
    pub(crate) popularity: Vec<T>,
    pub(crate) state: ModelState<T>,
}

fn popularity_of<T: Scalar>(train: &BinaryCsr) -> Vec<T> {
    train.col_degrees().into_iter().map(T::of_usize).collect()
}

impl<T: Scalar> FittedModel<T> {
    pub(crate) fn new(family: ModelFamily, params: Params, seed: u64, train: &BinaryCsr, state: ModelState<T>) -> Self {
        Self { family, params, seed, n_items: train.n_cols(), popularity: popularity_of(train), state }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn state(&self) -> &ModelState<T> {
        &self.state
    }

    pub fn popularity(&self) -> &[T] {
        &self.popularity
    }

    fn check_fold_in(&self, fold_in: &[u32]) -> Result<()> {
        if let Some(&bad) = fold_in.iter().find(|&&i| i as usize >= self.n_items) {
            return Err(Error::Contract(format!("fold-in item {bad} outside {} items", self.n_items)));
        }
        if fold_in.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("fold-in must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Scores every item for a user with the given fold-in (ascending item
    /// indices). Personalized families reject an empty fold-in.
    pub fn score(&self, fold_in: &[u32]) -> Result<Vec<T>> {
        self.check_fold_in(fold_in)?;
        let personalized = !matches!(self.state, ModelState::Random | ModelState::Popularity);
        if personalized && fold_in.is_empty() {
            return Err(Error::ColdStart);
        }
        Ok(match &self.state {
            ModelState::Random => random_scores(self.seed, fold_in, self.n_items),
            ModelState::Popularity => self.popularity.clone(),
            ModelState::SparseItemItem(w) => w.sum_rows(fold_in),
            ModelState::DenseItemItem(b) => {
                let mut out = vec![T::zero(); self.n_items];
                for &i in fold_in {
                    for (o, &v) in out.iter_mut().zip(b.row(i as usize)) {
                        *o += v;
                    }
                }
                out
            }
            ModelState::UserNeighbors { train, train_t, params } => knn::score_user_knn(train, train_t, params, fold_in),
            ModelState::Projection(v) => factor::score_projection(v, fold_in),
            ModelState::WeightedFactors { y, gram, regularization, confidence } => {
                factor::score_fold_in(y, gram, *regularization, *confidence, fold_in)?
            }
        })
    }

    /// Like [`score`](Self::score) but falls back to popularity for an empty
    /// fold-in. The flag reports whether the fallback was used.
    pub fn score_or_popularity(&self, fold_in: &[u32]) -> Result<(Vec<T>, bool)> {
        match self.score(fold_in) {
            Err(Error::ColdStart) => Ok((self.popularity.clone(), true)),
            other => other.map(|s| (s, false)),
        }
    }
}

/// Uniform scores from a stream keyed by `(seed, fold-in)`.
fn random_scores<T: Scalar>(seed: u64, fold_in: &[u32], n_items: usize) -> Vec<T> {
    let bytes: Vec<u8> = fold_in.iter().flat_map(|i| i.to_le_bytes()).collect();
    let mut rng = SeedStream::new(derive_seed(seed, &[b"random-scores", &bytes]));
    (0..n_items).map(|_| T::of(rng.unit())).collect()
}

fn param_f64(p: &Params, name: &str) -> Result<f64> {
    p.get(name)
        .and_then(ParamValue::as_f64)
        .ok_or_else(|| Error::Contract(format!("parameter {name:?} missing or not numeric")))
}

fn param_usize(p: &Params, name: &str) -> Result<usize> {
    p.get(name)
        .and_then(ParamValue::as_i64)
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| Error::Contract(format!("parameter {name:?} missing or not a count")))
}

fn param_bool(p: &Params, name: &str) -> Result<bool> {
    p.get(name)
        .and_then(ParamValue::as_bool)
        .ok_or_else(|| Error::Contract(format!("parameter {name:?} missing or not boolean")))
}

fn knn_params(p: &Params) -> Result<KnnParams> {
    let weighting = p
        .get("weighting")
        .and_then(ParamValue::as_str)
        .ok_or_else(|| Error::Contract("parameter \"weighting\" missing".into()))?
        .parse()?;
    Ok(KnnParams {
        weighting,
        k: param_usize(p, "k")?,
        lambda: param_f64(p, "lambda")?,
        alpha: param_f64(p, "alpha")?,
    })
}

/// Fits `spec` on the training users. Parameters are validated against the
/// family's search space; unset ones take the family defaults.
pub fn fit<T: Scalar>(spec: &ModelSpec, train: &InteractionDataset, options: &FitOptions) -> Result<FittedModel<T>> {
    fit_in(spec, &spec.family.search_space(), train, options)
}

/// [`fit`] with parameters validated against `space`, which may override the
/// family's default domains.
pub fn fit_in<T: Scalar>(
    spec: &ModelSpec,
    space: &SearchSpace,
    train: &InteractionDataset,
    options: &FitOptions,
) -> Result<FittedModel<T>> {
    let params = spec.resolved_params_in(space)?;
    let x = train.matrix();
    let mut model = match spec.family {
        ModelFamily::Random => FittedModel::new(spec.family, Params::new(), spec.seed, x, ModelState::Random),
        ModelFamily::Popularity => FittedModel::new(spec.family, Params::new(), spec.seed, x, ModelState::Popularity),
        ModelFamily::ItemKNN => fit_item_knn(x, &knn_params(&params)?)?,
        ModelFamily::UserKNN => fit_user_knn(x, &knn_params(&params)?)?,
        ModelFamily::P3alpha | ModelFamily::RP3beta => {
            let variant = if spec.family == ModelFamily::P3alpha { GraphVariant::P3alpha } else { GraphVariant::RP3beta };
            let gp = GraphParams {
                variant,
                alpha: param_f64(&params, "alpha")?,
                beta: if variant == GraphVariant::RP3beta { param_f64(&params, "beta")? } else { 0.0 },
                k: param_usize(&params, "k")?,
                normalize_similarity: param_bool(&params, "normalize_similarity")?,
            };
            fit_graph_walk(x, &gp)?
        }
        ModelFamily::PureSVD => {
            let sp = SvdParams {
                n_factors: param_usize(&params, "n_factors")?,
                exact_max_items: options.svd_exact_max_items,
                oversampling: options.svd_oversampling,
                power_iterations: options.svd_power_iterations,
            };
            fit_puresvd(x, &sp, spec.seed)?
        }
        ModelFamily::ALS => {
            let ap = AlsParams {
                n_factors: param_usize(&params, "n_factors")?,
                regularization: param_f64(&params, "regularization")?,
                confidence: options.als_confidence,
                iterations: options.als_iterations,
            };
            fit_als(x, &ap, spec.seed)?
        }
        ModelFamily::SLIM => {
            let sp = SlimParams {
                l1: param_f64(&params, "l1")?,
                l2: param_f64(&params, "l2")?,
                tolerance: options.slim_tolerance,
                max_sweeps: options.slim_max_sweeps,
                nonnegative: options.slim_nonnegative,
            };
            fit_slim(x, &sp)?
        }
        ModelFamily::Ease => {
            let ep = EaseParams { lmbda: param_f64(&params, "lmbda")?, memory_budget_bytes: options.memory_budget_bytes };
            fit_ease(x, &ep)?
        }
    };
    model.family = spec.family;
    model.params = params;
    model.seed = spec.seed;
    Ok(model)
}
