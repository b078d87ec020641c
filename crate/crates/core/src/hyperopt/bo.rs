//! Gaussian-process Bayesian optimization over the unit-cube encoding of a
//! search space.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{sample_random, Params, SearchSpace, Trial};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::rng::SeedStream;
use crate::{Error, Result};

/// Fixed constants of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    /// Random suggestions before the surrogate takes over.
    pub n_init: usize,
    pub n_candidates: usize,
    /// Best candidates polished by local search.
    pub n_refine: usize,
    pub refine_steps: usize,
    /// Exploration margin of Expected Improvement, in standardized units.
    pub xi: f64,
    /// Lengthscales tried, picked by marginal likelihood.
    pub lengthscales: Vec<f64>,
    /// Observation noise variance; raised tenfold on factorization failure.
    pub jitter: f64,
    pub max_jitter: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_candidates: 1000,
            n_refine: 5,
            refine_steps: 30,
            xi: 0.01,
            lengthscales: vec![0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0],
            jitter: 1e-6,
            max_jitter: 1e-2,
        }
    }
}

/// Matérn-5/2 correlation at distance `r` with lengthscale `l`.
pub fn matern52(r: f64, l: f64) -> f64 {
    let s = 5f64.sqrt() * r / l;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// GP regression with unit signal variance on standardized targets.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64>,
    /// `(K + σ²I)⁻¹ z` for standardized targets `z`.
    weights: Vec<f64>,
    lengthscale: f64,
    noise: f64,
    y_mean: f64,
    y_scale: f64,
    log_marginal: f64,
}

impl GaussianProcess {
    pub fn fit(x: &[Vec<f64>], y: &[f64], lengthscale: f64, noise: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(Error::Contract("GP needs matching, non-empty inputs and targets".into()));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let k = DenseMatrix::from_fn(n, n, |i, j| {
            matern52(distance(&x[i], &x[j]), lengthscale) + if i == j { noise } else { 0.0 }
        });
        let chol = Cholesky::factor(&k)?;
        let weights = chol.solve(&z);
        let l = chol.factor_matrix();
        let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
        let fit: f64 = z.iter().zip(&weights).map(|(a, b)| a * b).sum();
        let log_marginal = -0.5 * fit - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self { x: x.to_vec(), chol, weights, lengthscale, noise, y_mean, y_scale, log_marginal })
    }

    /// Best lengthscale from `config.lengthscales`, raising the jitter on
    /// factorization failure.
    pub fn fit_auto(x: &[Vec<f64>], y: &[f64], config: &BoConfig) -> Result<Self> {
        let mut noise = config.jitter;
        loop {
            let best = config
                .lengthscales
                .iter()
                .filter_map(|&l| GaussianProcess::fit(x, y, l, noise).ok())
                .max_by(|a, b| a.log_marginal.total_cmp(&b.log_marginal));
            if let Some(gp) = best {
                return Ok(gp);
            }
            noise *= 10.0;
            if noise > config.max_jitter * (1.0 + 1e-9) {
                return Err(Error::Numerical("GP kernel matrix not positive definite at any jitter".into()));
            }
            log::debug!("GP factorization failed, raising jitter to {noise:e}");
        }
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior mean and variance of the latent function, standardized units.
    fn standardized(&self, x: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = self.x.iter().map(|xi| matern52(distance(xi, x), self.lengthscale)).collect();
        let mean = ks.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let v = self.chol.solve(&ks);
        let var = (1.0 - ks.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()).max(0.0);
        (mean, var)
    }

    /// Posterior mean and variance in the units of the targets.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.standardized(x);
        (self.y_mean + self.y_scale * m, self.y_scale * self.y_scale * v)
    }

    /// Expected Improvement over the best observed target, in standardized units.
    pub fn expected_improvement(&self, x: &[f64], best_y: f64, xi: f64) -> f64 {
        let (m, v) = self.standardized(x);
        expected_improvement(m, v.sqrt(), (best_y - self.y_mean) / self.y_scale, xi)
    }
}

/// `E[max(f - best - ξ, 0)]` for `f ~ N(mean, sd²)`.
pub fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if !(sd > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    (gain * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

/// Next point to evaluate given the history of this study. Failed trials are
/// ignored by the surrogate but never re-suggested.
pub fn bo_suggest(space: &SearchSpace, history: &[Trial], rng: &mut SeedStream) -> Params {
    bo_suggest_with(space, history, &BoConfig::default(), rng)
}

pub fn bo_suggest_with(space: &SearchSpace, history: &[Trial], config: &BoConfig, rng: &mut SeedStream) -> Params {
    if space.is_empty() {
        return Params::new();
    }
    let observed: Vec<(&Params, f64)> =
        history.iter().filter_map(|t| t.objective.map(|y| (&t.params, y))).collect();
    if history.len() < config.n_init || observed.len() < 2 {
        return fresh_random(space, history, rng);
    }
    let x: Vec<Vec<f64>> = observed.iter().map(|(p, _)| space.encode(p)).collect();
    let y: Vec<f64> = observed.iter().map(|&(_, y)| y).collect();
    let gp = match GaussianProcess::fit_auto(&x, &y, config) {
        Ok(gp) => gp,
        Err(e) => {
            log::warn!("{e}; falling back to a random suggestion");
            return fresh_random(space, history, rng);
        }
    };
    let best_y = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ei = |p: &[f64]| gp.expected_improvement(p, best_y, config.xi);

    let mut cands: Vec<(Vec<f64>, f64)> = (0..config.n_candidates)
        .map(|_| {
            let p = space.encode(&sample_random(space, rng));
            let a = ei(&p);
            (p, a)
        })
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (p, a) in cands.iter_mut().take(config.n_refine) {
        refine(p, a, &ei, config.refine_steps, rng);
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (p, _) in &cands {
        let params = space.decode(p);
        if !history.iter().any(|t| t.params == params) {
            return params;
        }
    }
    fresh_random(space, history, rng)
}

/// Gaussian-step hill climbing in the unit cube with a shrinking radius.
fn refine(p: &mut Vec<f64>, score: &mut f64, ei: &impl Fn(&[f64]) -> f64, steps: usize, rng: &mut SeedStream) {
    let mut radius = 0.1;
    for _ in 0..steps {
        let trial: Vec<f64> = p.iter().map(|&v| (v + radius * rng.normal()).clamp(0.0, 1.0)).collect();
        let a = ei(&trial);
        if a > *score {
            *p = trial;
            *score = a;
        } else {
            radius *= 0.85;
        }
    }
}

/// A random point not yet in the history, if one turns up within a few draws.
fn fresh_random(space: &SearchSpace, history: &[Trial], rng: &mut SeedStream) -> Params {
    let mut p = sample_random(space, rng);
    for _ in 0..100 {
        if !history.iter().any(|t| t.params == p) {
            break;
        }
        p = sample_random(space, rng);
    }
    p
}
