use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bo::{bo_suggest_with, BoConfig};
use super::grid::grid_enumerate;
use super::{sample_random, Params, SearchSpace};
use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result};

/// Default number of evaluations per study.
pub const DEFAULT_BUDGET: usize = 50;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Bayesian,
    Random,
    Grid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Bayesian, Strategy::Random, Strategy::Grid];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bayesian => "bayesian",
            Strategy::Random => "random",
            Strategy::Grid => "grid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bayesian" | "bo" => Ok(Strategy::Bayesian),
            "random" => Ok(Strategy::Random),
            "grid" => Ok(Strategy::Grid),
            _ => Err(Error::domain(format!("unknown search strategy {s:?}"))),
        }
    }
}

/// One evaluation. `objective` is `None` when the evaluation failed or was
/// not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub params: Params,
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub strategy: Strategy,
    pub trials: Vec<Trial>,
    /// Running maximum of the objective; `None` until the first success.
    pub best_so_far: Vec<Option<f64>>,
}

impl SearchTrace {
    fn new(strategy: Strategy, trials: Vec<Trial>) -> Self {
        let mut best: Option<f64> = None;
        let best_so_far = trials
            .iter()
            .map(|t| {
                if let Some(y) = t.objective {
                    best = Some(best.map_or(y, |b| b.max(y)));
                }
                best
            })
            .collect();
        Self { strategy, trials, best_so_far }
    }

    /// Highest objective, the earliest such trial on ties.
    pub fn best(&self) -> Option<&Trial> {
        self.trials.iter().filter(|t| t.objective.is_some()).fold(None, |acc: Option<&Trial>, t| match acc {
            Some(a) if a.objective >= t.objective => Some(a),
            _ => Some(t),
        })
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.best().and_then(|t| t.objective)
    }

    /// `best_so_far` divided by `reference`, the best score over all
    /// strategies of the study.
    pub fn normalized(&self, reference: f64) -> Result<Vec<Option<f64>>> {
        if !(reference > 0.0) {
            return Err(Error::domain(format!("normalization needs a positive reference, got {reference}")));
        }
        Ok(self.best_so_far.iter().map(|b| b.map(|v| v / reference)).collect())
    }

    /// Columns: iteration, one per parameter (space order), objective, best_so_far.
    pub fn write_csv<W: Write>(&self, space: &SearchSpace, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let names: Vec<&str> = space.dims().iter().map(|(n, _)| n.as_str()).collect();
        writeln!(out, "iteration,{}objective,best_so_far", names.iter().map(|n| format!("{n},")).collect::<String>())?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (t, b) in self.trials.iter().zip(&self.best_so_far) {
            let params: String = names.iter().map(|n| format!("{},", t.params.get(*n).map(|v| v.to_string()).unwrap_or_default())).collect();
            writeln!(out, "{},{params}{},{}", t.iteration, opt(t.objective), opt(*b))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalizes the traces of one study by their common best score.
pub fn normalize_study(traces: &[SearchTrace]) -> Result<Vec<Vec<Option<f64>>>> {
    let reference = traces
        .iter()
        .filter_map(SearchTrace::best_objective)
        .fold(f64::NEG_INFINITY, f64::max);
    traces.iter().map(|t| t.normalized(reference)).collect()
}

/// Pointwise mean of normalized curves. Shorter curves are extended with
/// their last value; positions before a curve's first success are skipped.
pub fn average_curves(curves: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<f64> = curves
                .iter()
                .filter_map(|c| if i < c.len() { c[i] } else { c.last().copied().flatten() })
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        })
        .collect()
}

fn run_trial<F>(objective: &F, iteration: usize, params: Params) -> Trial
where
    F: Fn(&Params) -> Result<f64> + Sync,
{
    match objective(&params) {
        Ok(y) if y.is_finite() => Trial { iteration, params, objective: Some(y), error: None },
        Ok(y) => {
            log::warn!("trial {iteration}: objective {y} is not finite");
            Trial { iteration, params, objective: None, error: Some(format!("non-finite objective {y}")) }
        }
        Err(e) => {
            log::warn!("trial {iteration} failed: {e}");
            Trial { iteration, params, objective: None, error: Some(e.to_string()) }
        }
    }
}

/// Maximizes `objective` over `space`. Random and grid candidates are
/// generated up front and evaluated in parallel; Bayesian optimization is
/// sequential. Deterministic in `(space, objective, budget, strategy, seed)`.
pub fn optimize<F>(objective: F, space: &SearchSpace, budget: usize, strategy: Strategy, seed: u64) -> Result<SearchTrace>
where
    F: Fn(&Params) -> Result<f64> + Sync,
{
    optimize_with(objective, space, budget, strategy, seed, &BoConfig::default())
}

pub fn optimize_with<F>(
    objective: F,
    space: &SearchSpace,
    budget: usize,
    strategy: Strategy,
    seed: u64,
    bo: &BoConfig,
) -> Result<SearchTrace>
where
    F: Fn(&Params) -> Result<f64> + Sync,
{
    if budget == 0 {
        return Err(Error::Budget("search budget must be at least 1".into()));
    }
    // every point of an empty space is the same
    let budget = if space.is_empty() { 1 } else { budget };
    let mut rng = SeedStream::new(derive_seed(seed, &[b"search", strategy.name().as_bytes()]));
    let trials = match strategy {
        Strategy::Random | Strategy::Grid => {
            let points = if strategy == Strategy::Grid {
                grid_enumerate(space, budget)?
            } else {
                (0..budget).map(|_| sample_random(space, &mut rng)).collect()
            };
            points.into_par_iter().enumerate().map(|(i, p)| run_trial(&objective, i, p)).collect()
        }
        Strategy::Bayesian => {
            let mut trials: Vec<Trial> = Vec::with_capacity(budget);
            for i in 0..budget {
                let p = bo_suggest_with(space, &trials, bo, &mut rng);
                trials.push(run_trial(&objective, i, p));
            }
            trials
        }
    };
    let trace = SearchTrace::new(strategy, trials);
    if trace.best().is_none() {
        let last = trace.trials.last().and_then(|t| t.error.clone()).unwrap_or_default();
        return Err(Error::Optimization(format!("all {} trials failed; last error: {last}", trace.trials.len())));
    }
    Ok(trace)
}
