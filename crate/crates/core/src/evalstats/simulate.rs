//! Split-by-ratio confound: a recommender with the same accuracy for every
//! user is scored against test sets of growing size.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{Judgments, MetricKind, MetricSpec};
use crate::rng::{derive_seed, SeedStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub max_test_size: usize,
    pub catalog_size: usize,
    pub n_users: usize,
    /// Item at rank `r` is relevant with probability `exp(-decay r)`.
    pub decay: f64,
    pub metrics: Vec<MetricSpec>,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let m = |kind, k| MetricSpec::new(kind, k).expect("positive cutoff");
        Self {
            max_test_size: 20,
            catalog_size: 1000,
            n_users: 10_000,
            decay: 0.05,
            metrics: vec![
                m(MetricKind::HitRate, 10),
                m(MetricKind::Recall, 50),
                m(MetricKind::Precision, 10),
                m(MetricKind::Ndcg, 10),
            ],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub test_size: usize,
    pub metric: MetricSpec,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTable {
    pub rows: Vec<SimulationRow>,
    /// Hidden sets redrawn because they held fewer than `max_test_size` items.
    pub redraws: u64,
}

impl SimulationTable {
    pub fn mean(&self, test_size: usize, metric: &MetricSpec) -> Option<f64> {
        self.rows.iter().find(|r| r.test_size == test_size && &r.metric == metric).map(|r| r.mean)
    }

    /// Columns: test_size, metric, mean, stderr.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "test_size,metric,mean,stderr")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.test_size, r.metric, r.mean, r.stderr)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Simulates users whose hidden relevant set follows a position-based model
/// under a fixed identity ranking, then, for each test size `t`, samples `t`
/// hidden items without replacement as the test set and averages the metrics.
pub fn simulate_split_by_ratio(config: &SimulationConfig) -> Result<SimulationTable> {
    let t_max = config.max_test_size;
    let n = config.catalog_size;
    if t_max < 1 || config.n_users < 1 || config.metrics.is_empty() {
        return Err(Error::domain("simulation needs max_test_size, n_users and metrics to be non-empty"));
    }
    if n < t_max || !(config.decay > 0.0) {
        return Err(Error::domain("simulation needs catalog_size >= max_test_size and decay > 0"));
    }
    let expected: f64 = (1..=n).map(|r| (-config.decay * r as f64).exp()).sum();
    if expected < t_max as f64 / 20.0 {
        return Err(Error::domain(format!(
            "expected hidden-set size {expected:.2} is far below max_test_size {t_max}; rejection would not terminate"
        )));
    }
    let ranked: Vec<u32> = (0..n as u32).collect();
    let probs: Vec<f64> = (1..=n).map(|r| (-config.decay * r as f64).exp()).collect();
    let n_metrics = config.metrics.len();

    // per user: values[t-1][metric], plus the number of redraws
    let per_user: Vec<(Vec<Vec<f64>>, u64)> = (0..config.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = SeedStream::new(derive_seed(config.seed, &[b"sim-user", &(u as u64).to_le_bytes()]));
            let mut redraws = 0u64;
            let hidden = loop {
                let h: Vec<u32> = (0..n as u32).filter(|&i| rng.unit() < probs[i as usize]).collect();
                if h.len() >= t_max {
                    break h;
                }
                redraws += 1;
            };
            let mut pool = hidden;
            let values = (1..=t_max)
                .map(|t| {
                    rng.partial_shuffle(&mut pool, t);
                    let judgments = Judgments::new(pool[..t].to_vec())?;
                    config.metrics.iter().map(|m| m.evaluate(&ranked, &judgments)).collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((values, redraws))
        })
        .collect::<Result<_>>()?;

    let redraws: u64 = per_user.iter().map(|(_, r)| r).sum();
    if redraws > 0 {
        log::info!("simulation redrew {redraws} hidden sets smaller than {t_max}");
    }
    let users = config.n_users as f64;
    let mut rows = Vec::with_capacity(t_max * n_metrics);
    for t in 0..t_max {
        for (m, metric) in config.metrics.iter().enumerate() {
            let mean = per_user.iter().map(|(v, _)| v[t][m]).sum::<f64>() / users;
            let var = if config.n_users > 1 {
                per_user.iter().map(|(v, _)| (v[t][m] - mean).powi(2)).sum::<f64>() / (users - 1.0)
            } else {
                0.0
            };
            rows.push(SimulationRow { test_size: t + 1, metric: *metric, mean, stderr: (var / users).sqrt() });
        }
    }
    Ok(SimulationTable { rows, redraws })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_item_relevant_is_perfect() {
        let ranked: Vec<u32> = (0..100).collect();
        let j = Judgments::new(vec![0]).unwrap();
        assert_eq!(MetricSpec::new(MetricKind::Ndcg, 10).unwrap().evaluate(&ranked, &j).unwrap(), 1.0);
        assert_eq!(MetricSpec::new(MetricKind::Recall, 50).unwrap().evaluate(&ranked, &j).unwrap(), 1.0);
    }

    #[test]
    fn small_simulation_shapes() {
        let c = SimulationConfig { n_users: 500, ..SimulationConfig::default() };
        let t = simulate_split_by_ratio(&c).unwrap();
        assert_eq!(t.rows.len(), 20 * 4);
        let hr = &c.metrics[0];
        assert!(t.mean(20, hr).unwrap() > t.mean(1, hr).unwrap());
        assert_eq!(t, simulate_split_by_ratio(&c).unwrap());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("test_size,metric,mean,stderr\n1,hitrate@10,"));
    }

    #[test]
    fn rejects_impossible_setups() {
        let c = SimulationConfig { decay: 3.0, ..SimulationConfig::default() };
        assert!(simulate_split_by_ratio(&c).is_err());
        let c = SimulationConfig { catalog_size: 5, ..SimulationConfig::default() };
        assert!(simulate_split_by_ratio(&c).is_err());
    }
}
