use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::hyperopt::{optimize_with, BoConfig, Params, SearchSpace, SearchTrace, Strategy, DEFAULT_BUDGET};
use crate::metrics::{evaluate_user, Judgments, MetricSpec};
use crate::models::{fit_in, FitOptions, FittedModel, ModelFamily, ModelSpec};
use crate::rng::derive_seed;
use crate::splitting::{assign_user_folds, build_fold_data, build_inner_fold_data, EvalUser, SplitPlan};
use crate::{Error, Result, Scalar};

/// Settings of one nested cross-validation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCvConfig {
    pub plan: SplitPlan,
    pub strategy: Strategy,
    pub budget: usize,
    /// Optimized on validation items and reported on test items.
    pub primary: MetricSpec,
    /// Additional metrics reported on test items.
    pub report: Vec<MetricSpec>,
    pub fit: FitOptions,
    pub bo: BoConfig,
    /// Seeds the search and the models; the split has its own seed.
    pub seed: u64,
}

impl NestedCvConfig {
    pub fn new(plan: SplitPlan, seed: u64) -> Self {
        Self {
            plan,
            strategy: Strategy::Bayesian,
            budget: DEFAULT_BUDGET,
            primary: MetricSpec::hitrate(50),
            report: Vec::new(),
            fit: FitOptions::default(),
            bo: BoConfig::default(),
            seed,
        }
    }

    /// Primary metric first, then the report metrics without repeats.
    pub fn metrics(&self) -> Vec<MetricSpec> {
        let mut out = vec![self.primary];
        for m in &self.report {
            if !out.contains(m) {
                out.push(*m);
            }
        }
        out
    }
}

/// Which items of an evaluation user are input and which are targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Fold-in as input, validation items as targets.
    Validation,
    /// Fold-in and validation items as input, test items as targets.
    Test,
}

/// Per-user metric values, `[metric][user]`, and how many users had an
/// empty input and were scored by popularity.
pub fn evaluate_users<T: Scalar>(
    model: &FittedModel<T>,
    users: &[EvalUser],
    target: Target,
    metrics: &[MetricSpec],
) -> Result<(Vec<Vec<f64>>, usize)> {
    let rows: Vec<(Vec<f64>, bool)> = users
        .par_iter()
        .map(|u| {
            let (input, relevant) = match target {
                Target::Validation => (u.split.fold_in.clone(), u.split.val_items.clone()),
                Target::Test => (u.split.test_input(), u.split.test_items.clone()),
            };
            let (scores, cold) = model.score_or_popularity(&input)?;
            let judgments = Judgments::new(relevant)?;
            Ok((evaluate_user(&scores, &input, &judgments, metrics)?, cold))
        })
        .collect::<Result<_>>()?;
    let cold = rows.iter().filter(|(_, c)| *c).count();
    let per_metric = (0..metrics.len()).map(|m| rows.iter().map(|(v, _)| v[m]).collect()).collect();
    Ok((per_metric, cold))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Outcome of one outer fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome<T> {
    pub fold: usize,
    pub best_params: Params,
    pub trace: SearchTrace,
    /// Final model, refit on all training folds with `best_params`.
    pub model: FittedModel<T>,
    /// Evaluated test users, ascending.
    pub users: Vec<usize>,
    /// `[metric][user]`, metrics in [`NestedCvConfig::metrics`] order.
    pub user_scores: Vec<Vec<f64>>,
    /// Mean of each metric over `users`.
    pub means: Vec<f64>,
    pub skipped_users: usize,
    pub cold_start_users: usize,
}

#[derive(Debug, Clone)]
pub struct NestedCvResult<T> {
    pub family: ModelFamily,
    pub metrics: Vec<MetricSpec>,
    pub folds: Vec<FoldOutcome<T>>,
}

/// Per-fold means of one metric with the per-user values behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub metric: MetricSpec,
    pub scores: Vec<f64>,
    pub users: Vec<Vec<usize>>,
    pub per_user: Vec<Vec<f64>>,
}

impl FoldScores {
    pub fn mean(&self) -> f64 {
        mean(&self.scores)
    }

    /// Every user score of every fold, fold by fold.
    pub fn pooled(&self) -> Vec<f64> {
        self.per_user.iter().flatten().copied().collect()
    }
}

impl<T> NestedCvResult<T> {
    pub fn fold_scores(&self, metric: &MetricSpec) -> Option<FoldScores> {
        let m = self.metrics.iter().position(|s| s == metric)?;
        Some(FoldScores {
            metric: *metric,
            scores: self.folds.iter().map(|f| f.means[m]).collect(),
            users: self.folds.iter().map(|f| f.users.clone()).collect(),
            per_user: self.folds.iter().map(|f| f.user_scores[m].clone()).collect(),
        })
    }

    pub fn primary(&self) -> FoldScores {
        self.fold_scores(&self.metrics[0]).expect("primary metric is always evaluated")
    }
}

/// Bootstrapped nested cross-validation. For every outer fold: tune on the
/// inner split (remaining folds minus one for training, the last for
/// validation), refit on all training folds, and score the fold's users on
/// their test items. Folds run in parallel; a failed fold aborts the study.
pub fn nested_cv<T: Scalar>(
    dataset: &InteractionDataset,
    family: ModelFamily,
    space: &SearchSpace,
    config: &NestedCvConfig,
) -> Result<NestedCvResult<T>> {
    config.plan.validate()?;
    if config.plan.n_val == 0 {
        return Err(Error::domain("nested cross-validation needs n_val >= 1 for the inner validation split"));
    }
    if config.budget == 0 {
        return Err(Error::Budget("search budget must be at least 1".into()));
    }
    let assignment = assign_user_folds(dataset.n_users(), config.plan.k, config.plan.seed)?;
    let metrics = config.metrics();
    let folds = (0..config.plan.k)
        .into_par_iter()
        .map(|f| run_fold(dataset, family, space, config, &assignment, &metrics, f).map_err(|e| e.in_fold(f)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NestedCvResult { family, metrics, folds })
}

fn run_fold<T: Scalar>(
    dataset: &InteractionDataset,
    family: ModelFamily,
    space: &SearchSpace,
    config: &NestedCvConfig,
    assignment: &crate::splitting::FoldAssignment,
    metrics: &[MetricSpec],
    fold: usize,
) -> Result<FoldOutcome<T>> {
    let fold_bytes = (fold as u64).to_le_bytes();
    let model_seed = derive_seed(config.seed, &[b"model", &fold_bytes]);
    let inner = build_inner_fold_data(dataset, assignment, fold, &config.plan)?;
    let objective = |params: &Params| -> Result<f64> {
        let spec = ModelSpec::new(family, params.clone(), model_seed);
        let model: FittedModel<T> = fit_in(&spec, space, &inner.train, &config.fit)?;
        let (scores, _) = evaluate_users(&model, &inner.eval_users, Target::Validation, &[config.primary])?;
        Ok(mean(&scores[0]))
    };
    let search_seed = derive_seed(config.seed, &[b"search", &fold_bytes]);
    let trace = optimize_with(objective, space, config.budget, config.strategy, search_seed, &config.bo)?;
    let best_params = trace.best().expect("optimize returns a successful trial").params.clone();
    log::info!("{family} fold {fold}: best validation {} with {:?}", trace.best_objective().unwrap_or(f64::NAN), best_params);

    let outer = build_fold_data(dataset, assignment, fold, &config.plan)?;
    let spec = ModelSpec::new(family, best_params.clone(), model_seed);
    let model: FittedModel<T> = fit_in(&spec, space, &outer.train, &config.fit)?;
    let (user_scores, cold_start_users) = evaluate_users(&model, &outer.eval_users, Target::Test, metrics)?;
    let means = user_scores.iter().map(|s| mean(s)).collect();
    Ok(FoldOutcome {
        fold,
        best_params,
        trace,
        model,
        users: outer.eval_users.iter().map(|u| u.user).collect(),
        user_scores,
        means,
        skipped_users: outer.skipped_users,
        cold_start_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;
    use crate::metrics::MetricKind;
    use crate::models::{read_model, write_model};
    use crate::rng::SeedStream;
    use crate::splitting::split_manifest;

    pub(crate) fn synthetic(n_users: usize, n_items: usize, per_user: usize, seed: u64) -> InteractionDataset {
        let mut rng = SeedStream::new(seed);
        let mut xs = Vec::new();
        for u in 0..n_users {
            // skew toward low item ids so models have signal
            let mut items: Vec<(u64, usize)> = (0..n_items).map(|i| ((i as f64 * rng.unit() * 1000.0) as u64, i)).collect();
            items.sort_unstable();
            let items: Vec<usize> = items.into_iter().map(|(_, i)| i).collect();
            for &i in items.iter().take(per_user) {
                xs.push(Interaction::new(format!("u{u}"), format!("i{i:03}"), 1.0, None));
            }
        }
        InteractionDataset::from_interactions(&xs).unwrap()
    }

    fn config(budget: usize) -> NestedCvConfig {
        let mut c = NestedCvConfig::new(SplitPlan::new(5, 11, 1, 1).unwrap(), 3);
        c.budget = budget;
        c.primary = MetricSpec::hitrate(10);
        c.report = vec![MetricSpec::new(MetricKind::Ndcg, 10).unwrap()];
        c
    }

    #[test]
    fn five_folds_and_deterministic() {
        let d = synthetic(60, 40, 8, 1);
        let fam = ModelFamily::ItemKNN;
        let c = config(4);
        let a: NestedCvResult<f64> = nested_cv(&d, fam, &fam.search_space(), &c).unwrap();
        let b: NestedCvResult<f64> = nested_cv(&d, fam, &fam.search_space(), &c).unwrap();
        assert_eq!(a.folds.len(), 5);
        assert_eq!(a.primary(), b.primary());
        let ndcg = a.fold_scores(&c.report[0]).unwrap();
        assert_eq!(ndcg.scores.len(), 5);
        for f in &a.folds {
            assert_eq!(f.trace.trials.len(), 4);
            assert!((f.means[0] - mean(&f.user_scores[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn scores_replay_from_serialized_model_and_manifest() {
        let d = synthetic(50, 30, 7, 2);
        let fam = ModelFamily::Ease;
        let c = config(3);
        let r: NestedCvResult<f32> = nested_cv(&d, fam, &fam.search_space(), &c).unwrap();
        let manifest = split_manifest(&d, &c.plan).unwrap();
        for f in &r.folds {
            let mut buf = Vec::new();
            write_model(&f.model, &mut buf).unwrap();
            let model: FittedModel<f32> = read_model(buf.as_slice()).unwrap();
            let mut replay = Vec::new();
            for h in manifest.held_out.iter().filter(|h| manifest.fold_of_user[h.user] == f.fold) {
                let mut input: Vec<u32> = d
                    .user_items(h.user)
                    .iter()
                    .copied()
                    .filter(|i| !h.test_items.contains(i))
                    .collect();
                input.sort_unstable();
                let s = model.score(&input).unwrap();
                let j = Judgments::new(h.test_items.clone()).unwrap();
                replay.push(evaluate_user(&s, &input, &j, &[c.primary]).unwrap()[0]);
            }
            assert_eq!(replay, f.user_scores[0]);
        }
    }

    #[test]
    fn random_model_matches_expectation() {
        // HitRate@k with one test item: k / (n_items - input size)
        let (n_items, per_user, k) = (200, 10, 20);
        let d = synthetic(400, n_items, per_user, 4);
        let mut c = config(1);
        c.primary = MetricSpec::hitrate(k);
        let fam = ModelFamily::Random;
        let r: NestedCvResult<f64> = nested_cv(&d, fam, &fam.search_space(), &c).unwrap();
        let expect = k as f64 / (d.n_items() - (per_user - 1)) as f64;
        for s in r.primary().per_user {
            let n = s.len() as f64;
            let sigma = (expect * (1.0 - expect) / n).sqrt();
            assert!((mean(&s) - expect).abs() < 3.0 * sigma, "{} vs {expect}", mean(&s));
        }
    }

    #[test]
    fn fold_errors_carry_the_index() {
        let d = synthetic(30, 20, 6, 5);
        let mut c = config(2);
        c.fit.memory_budget_bytes = 10;
        let fam = ModelFamily::Ease;
        let err = nested_cv::<f64>(&d, fam, &fam.search_space(), &c).unwrap_err();
        assert!(matches!(err, Error::InFold { .. }), "{err}");
    }
}
