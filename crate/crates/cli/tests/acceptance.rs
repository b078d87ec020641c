//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL/SKIP line. The ML1M criterion runs
//! only with `--ignored` (or `--include-ignored`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use recsys_evalkit::data::{l_core, single_pass_filter, FilterOrder, Interaction, InteractionDataset};
use recsys_evalkit::evalstats::{
    bootstrap_ci, mcnemar_from_counts, mcnemar_test, nested_cv, McNemarMethod, NestedCvConfig,
};
use recsys_evalkit::hyperopt::{matern52, optimize, GaussianProcess, ParamDomain, SearchSpace, Strategy};
use recsys_evalkit::linalg::{truncated_svd, BinaryCsr, DenseMatrix, SvdMethod};
use recsys_evalkit::metrics::{Judgments, MetricKind, MetricSpec};
use recsys_evalkit::models::{
    als_objective, fit_als_traced, fit_ease, fit_slim, AlsParams, EaseParams, ModelFamily, ModelState, SlimParams,
};
use recsys_evalkit::rng::SeedStream;
use recsys_evalkit::splitting::SplitPlan;
use recsys_evalkit_cli::config::{ExperimentConfig, ModelConfig};
use recsys_evalkit_cli::{cmd_preprocess, cmd_run, cmd_simulate, cmd_stats, RunManifest};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// First existing candidate: the environment variable, the workspace
/// `data/` directory, then `/root/data`.
fn find_data(env: &str, relative: &str) -> Option<PathBuf> {
    std::env::var_os(env)
        .map(PathBuf::from)
        .into_iter()
        .chain([workspace_root().join("data").join(relative), Path::new("/root/data").join(relative)])
        .find(|p| p.is_file())
}

fn config_for(raw: &Path, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset.path = Some(raw.to_path_buf());
    c.output.dir = out.to_path_buf();
    c
}

fn rel_close(x: f64, target: f64, tol: f64) -> bool {
    ((x - target) / target).abs() <= tol
}

// 1 -------------------------------------------------------------------------

fn ml100k_preprocessing() -> Result<Outcome> {
    let Some(raw) = find_data("ML100K_PATH", "ml-100k/u.data") else {
        return Ok(Outcome::Skip("ML100K u.data not found (set ML100K_PATH)".into()));
    };
    let dir = tempfile::tempdir()?;
    let config = config_for(&raw, dir.path());
    let start = Instant::now();
    let s = cmd_preprocess(&config)?;
    let elapsed = start.elapsed();
    let f = &s.filtered;
    let ok = f.users == 938
        && f.items == 1008
        && rel_close(f.ratings as f64, 54_400.0, 0.005)
        && (f.ratings_per_user - 58.01).abs() <= 0.5
        && elapsed < Duration::from_secs(5);
    Ok(verdict(
        ok,
        format!(
            "{} users, {} items, {} ratings, r_u {:.4}, {:.2?}",
            f.users, f.items, f.ratings, f.ratings_per_user, elapsed
        ),
    ))
}

// 2 -------------------------------------------------------------------------

fn ml100k_temporal() -> Result<Outcome> {
    let Some(raw) = find_data("ML100K_PATH", "ml-100k/u.data") else {
        return Ok(Outcome::Skip("ML100K u.data not found (set ML100K_PATH)".into()));
    };
    let dir = tempfile::tempdir()?;
    let start = Instant::now();
    let s = cmd_stats(&config_for(&raw, dir.path()))?;
    let elapsed = start.elapsed();
    let matching: Vec<String> = s
        .temporal
        .iter()
        .filter(|v| {
            rel_close(v.report.new_user.mean_per_day, 4.36, 0.05)
                && rel_close(v.report.new_user.fraction_of_days, 0.935, 0.05)
        })
        .map(|v| {
            format!(
                "{}{}: {:.3}/day, {:.1}% days",
                v.source,
                if v.report.options.exclude_initial_day { "+exclusive" } else { "+inclusive" },
                v.report.new_user.mean_per_day,
                100.0 * v.report.new_user.fraction_of_days
            )
        })
        .collect();
    Ok(verdict(
        !matching.is_empty() && elapsed < Duration::from_secs(5),
        format!("{} of {} variants match [{}], {elapsed:.2?}", matching.len(), s.temporal.len(), matching.join("; ")),
    ))
}

// 3 -------------------------------------------------------------------------

fn simulation() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let config = ExperimentConfig::default().with_overrides(None, Some(dir.path().to_path_buf()));
    let start = Instant::now();
    let t = cmd_simulate(&config)?;
    let elapsed = start.elapsed();
    let recall = MetricSpec::new(MetricKind::Recall, 50)?;
    let ndcg = MetricSpec::new(MetricKind::Ndcg, 10)?;
    let get = |size, m: &MetricSpec| t.mean(size, m).ok_or_else(|| anyhow::anyhow!("missing {m} at t={size}"));
    let (r1, r20) = (get(1, &recall)?, get(20, &recall)?);
    let growth = get(20, &ndcg)? / get(1, &ndcg)?;
    let ok = rel_close(r20, r1, 0.10) && (3.0..=5.0).contains(&growth) && elapsed < Duration::from_secs(30);
    Ok(verdict(
        ok,
        format!("recall@50 {r1:.4} -> {r20:.4}, ndcg@10 growth {growth:.3}x, {elapsed:.2?}"),
    ))
}

// 4 -------------------------------------------------------------------------

fn ml1m_table_one(run_ignored: bool) -> Result<Outcome> {
    if !run_ignored {
        return Ok(Outcome::Skip("long-running; pass --ignored to run".into()));
    }
    let Some(raw) = find_data("ML1M_PATH", "ml-1m/ratings.dat") else {
        return Ok(Outcome::Skip("ML1M ratings.dat not found (set ML1M_PATH)".into()));
    };
    let dir = tempfile::tempdir()?;
    let mut config = config_for(&raw, dir.path());
    config.dataset.schema = recsys_evalkit_cli::config::SchemaConfig::Preset("ml1m".into());
    config.models = vec![ModelConfig::new(ModelFamily::ItemKNN), ModelConfig::new(ModelFamily::UserKNN)];
    config.search.budget = 20;
    let start = Instant::now();
    cmd_preprocess(&config)?;
    let run = cmd_run(&config)?;
    let in_range = run.reports.iter().all(|r| r.fold_scores.iter().all(|s| (0.40..=0.49).contains(s)));
    let overlap = run.reports[0].ci.overlaps(&run.reports[1].ci);
    let detail: Vec<String> = run
        .reports
        .iter()
        .map(|r| format!("{} {:?} ci [{:.3}, {:.3}]", r.model, r.fold_scores, r.ci.lo, r.ci.hi))
        .collect();
    Ok(verdict(in_range && overlap, format!("{}; {:.0?}", detail.join("; "), start.elapsed())))
}

// 5.1 -----------------------------------------------------------------------

fn naive_metric(kind: MetricKind, ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().enumerate() {
        if pos >= k {
            break;
        }
        if relevant.contains(item) {
            hits += 1;
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    match kind {
        MetricKind::HitRate => hits as f64,
        MetricKind::Recall => hits as f64 / relevant.len() as f64,
        MetricKind::Precision => hits as f64 / k as f64,
        MetricKind::Ndcg => {
            let mut ideal = 0.0;
            for pos in 0..k.min(relevant.len()) {
                ideal += 1.0 / ((pos + 2) as f64).log2();
            }
            dcg / ideal
        }
    }
}

/// Every list length up to 8, every non-empty relevant subset of an 8-item
/// catalog and every cutoff up to 9. Items are relabeled so the list is the
/// identity prefix, which loses no generality.
fn metric_oracle() -> Result<Outcome> {
    let mut checked = 0usize;
    for n in 1..=8u32 {
        let ranked: Vec<u32> = (0..n).collect();
        for mask in 1u32..(1 << 8) {
            let relevant: BTreeSet<u32> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
            let judgments = Judgments::new(relevant.iter().copied().collect())?;
            for k in 1..=9 {
                for kind in [MetricKind::HitRate, MetricKind::Recall, MetricKind::Precision, MetricKind::Ndcg] {
                    let got = MetricSpec::new(kind, k)?.evaluate(&ranked, &judgments)?;
                    let want = naive_metric(kind, &ranked, &relevant, k);
                    ensure!(got == want, "{kind:?}@{k} on {ranked:?} with {relevant:?}: {got} vs {want}");
                    checked += 1;
                }
            }
        }
    }
    Ok(Outcome::Pass(format!("{checked} cases equal")))
}

// 5.2 -----------------------------------------------------------------------

fn edge_set(d: &InteractionDataset) -> BTreeSet<(String, String)> {
    d.interactions().map(|x| (x.user, x.item)).collect()
}

fn random_graph(rng: &mut SeedStream) -> Result<InteractionDataset> {
    let users = 5 + rng.below(30) as usize;
    let items = 5 + rng.below(30) as usize;
    let density = 0.05 + 0.5 * rng.unit();
    let mut xs = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.unit() < density {
                xs.push(Interaction::new(format!("u{u}"), format!("i{i}"), 1.0, None));
            }
        }
    }
    if xs.is_empty() {
        xs.push(Interaction::new("u0", "i0", 1.0, None));
    }
    Ok(InteractionDataset::from_interactions(&xs)?)
}

fn iterate_single_pass(d: &InteractionDataset, l: usize, order: FilterOrder) -> Result<InteractionDataset> {
    let mut cur = d.clone();
    loop {
        let next = single_pass_filter(&cur, l, order)?;
        if next.n_ratings() == cur.n_ratings() {
            return Ok(next);
        }
        cur = next;
    }
}

fn l_core_properties() -> Result<Outcome> {
    let mut rng = SeedStream::new(2024);
    let mut nonempty = 0;
    for g in 0..200 {
        let d = random_graph(&mut rng)?;
        let l = 1 + rng.below(6) as usize;
        let core = l_core(&d, l)?;
        ensure!(edge_set(&l_core(&core, l)?) == edge_set(&core), "graph {g}: not idempotent");
        ensure!(
            core.user_degrees().iter().chain(&core.item_degrees()).all(|&x| x >= l),
            "graph {g}: a vertex has degree below {l}"
        );
        for order in [FilterOrder::UserFirst, FilterOrder::ItemFirst] {
            let it = iterate_single_pass(&d, l, order)?;
            ensure!(edge_set(&it) == edge_set(&core), "graph {g}: iterated {order:?} differs from the core");
        }
        nonempty += usize::from(!core.is_empty());
    }
    Ok(Outcome::Pass(format!("200 graphs, {nonempty} with a non-empty core")))
}

// 5.3 / 5.4 -----------------------------------------------------------------

fn random_binary(rng: &mut SeedStream, users: usize, items: usize, density: f64) -> BinaryCsr {
    let rows = (0..users)
        .map(|_| {
            let mut row: Vec<u32> = (0..items as u32).filter(|_| rng.unit() < density).collect();
            if row.is_empty() {
                row.push(rng.below(items as u64) as u32);
            }
            row
        })
        .collect();
    BinaryCsr::from_rows(items, rows)
}

fn dense_of(x: &BinaryCsr) -> Vec<Vec<f64>> {
    (0..x.n_rows())
        .map(|u| {
            let mut r = vec![0.0; x.n_cols()];
            for &i in x.row(u) {
                r[i as usize] = 1.0;
            }
            r
        })
        .collect()
}

fn gram_of(x: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; n]; n];
    for row in x {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    g
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().copied().chain((0..n).map(|j| if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot = m[c].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn ease_oracle(x: &BinaryCsr, lambda: f64) -> Vec<Vec<f64>> {
    let n = x.n_cols();
    let mut g = gram_of(&dense_of(x), n);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let p = invert(&g);
    (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { -p[i][j] / p[j][j] }).collect()).collect()
}

fn dense_weights(state: &ModelState<f64>, n: usize) -> Result<Vec<Vec<f64>>> {
    Ok(match state {
        ModelState::DenseItemItem(b) => (0..n).map(|i| b.row(i).to_vec()).collect(),
        ModelState::SparseItemItem(w) => (0..n).map(|i| (0..n).map(|j| w.get(i, j as u32)).collect()).collect(),
        _ => anyhow::bail!("unexpected model state"),
    })
}

fn ease_closed_form() -> Result<Outcome> {
    let mut rng = SeedStream::new(11);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = random_binary(&mut rng, 40, 10, 0.3);
        let lambda = 0.5 + 50.0 * rng.unit();
        let model = fit_ease::<f64>(&x, &EaseParams { lmbda: lambda, memory_budget_bytes: u64::MAX })?;
        let b = dense_weights(model.state(), 10)?;
        let want = ease_oracle(&x, lambda);
        for i in 0..10 {
            ensure!(b[i][i] == 0.0, "diagonal entry {i} is {}", b[i][i]);
            for j in 0..10 {
                worst = worst.max((b[i][j] - want[i][j]).abs());
            }
        }
    }
    Ok(verdict(worst <= 1e-10, format!("max |B - oracle| = {worst:.2e} over 10 fixtures, diag exactly 0")))
}

/// Projected gradient on `½‖x_j − Xw‖² + l1 Σw + ½ l2 ‖w‖²` over `w ≥ 0`,
/// `w_j = 0`.
fn slim_column_oracle(x: &[Vec<f64>], j: usize, l1: f64, l2: f64) -> Vec<f64> {
    let n = x[0].len();
    let g = gram_of(x, n);
    let lipschitz = (0..n).map(|i| g[i][i]).sum::<f64>() + l2;
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; n];
    for _ in 0..200_000 {
        let mut next = w.clone();
        for i in 0..n {
            if i == j {
                continue;
            }
            let grad = (0..n).map(|k| g[i][k] * w[k]).sum::<f64>() - g[i][j] + l1 + l2 * w[i];
            next[i] = (w[i] - step * grad).max(0.0);
        }
        w = next;
    }
    w
}

fn slim_oracle() -> Result<Outcome> {
    let mut rng = SeedStream::new(5);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let x = random_binary(&mut rng, 20, 6, 0.45);
        let (l1, l2) = (0.2 + rng.unit(), 0.5 + rng.unit());
        let params = SlimParams { l1, l2, tolerance: 1e-13, max_sweeps: 100_000, nonnegative: true };
        let w = dense_weights(fit_slim::<f64>(&x, &params)?.state(), 6)?;
        let dense = dense_of(&x);
        for j in 0..6 {
            let want = slim_column_oracle(&dense, j, l1, l2);
            for i in 0..6 {
                worst = worst.max((w[i][j] - want[i]).abs());
            }
        }
    }
    let mut relaxed = 0.0f64;
    for _ in 0..4 {
        let x = random_binary(&mut rng, 30, 6, 0.4);
        let lambda = 0.5 + 5.0 * rng.unit();
        let params = SlimParams { l1: 0.0, l2: lambda, tolerance: 1e-13, max_sweeps: 100_000, nonnegative: false };
        let w = dense_weights(fit_slim::<f64>(&x, &params)?.state(), 6)?;
        let e = ease_oracle(&x, lambda);
        for i in 0..6 {
            for j in 0..6 {
                relaxed = relaxed.max((w[i][j] - e[i][j]).abs());
            }
        }
    }
    Ok(verdict(
        worst <= 1e-5 && relaxed <= 1e-8,
        format!("max |W - projected gradient| = {worst:.2e}; relaxed vs Ease {relaxed:.2e}"),
    ))
}

// 5.5 -----------------------------------------------------------------------

fn naive_als_objective(x: &[Vec<f64>], u: &DenseMatrix<f64>, y: &DenseMatrix<f64>, reg: f64, conf: f64) -> f64 {
    let mut total = 0.0;
    for (a, row) in x.iter().enumerate() {
        for (i, &p) in row.iter().enumerate() {
            let s: f64 = u.row(a).iter().zip(y.row(i)).map(|(p, q)| p * q).sum();
            total += (1.0 + conf * p) * (p - s) * (p - s);
        }
    }
    let sq = |m: &DenseMatrix<f64>| m.as_slice().iter().map(|v| v * v).sum::<f64>();
    total + reg * (sq(u) + sq(y))
}

fn als_monotone() -> Result<Outcome> {
    let mut worst_rise = 0.0f64;
    let mut half_sweeps = 0;
    for seed in 0..20u64 {
        let mut rng = SeedStream::new(100 + seed);
        let x = random_binary(&mut rng, 25, 15, 0.3);
        let params = AlsParams { n_factors: 4, regularization: 0.1, confidence: 2.0, iterations: 8 };
        let (_, trace) = fit_als_traced::<f64>(&x, &params, seed)?;
        for w in trace.objective.windows(2) {
            worst_rise = worst_rise.max((w[1] - w[0]) / w[0].abs().max(1.0));
            half_sweeps += 1;
        }
        // the traced objective itself against a direct double sum
        let u = DenseMatrix::from_fn(25, 4, |_, _| rng.normal());
        let y = DenseMatrix::from_fn(15, 4, |_, _| rng.normal());
        let got = als_objective(&x, &u, &y, 0.1, 2.0);
        let want = naive_als_objective(&dense_of(&x), &u, &y, 0.1, 2.0);
        ensure!(rel_close(got, want, 1e-10), "objective {got} vs direct {want}");
    }
    Ok(verdict(worst_rise <= 1e-12, format!("{half_sweeps} half-sweeps, largest relative rise {worst_rise:.2e}")))
}

// 5.6 -----------------------------------------------------------------------

fn eckart_young() -> Result<Outcome> {
    let mut rng = SeedStream::new(77);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = DenseMatrix::from_fn(12, 8, |_, _| rng.normal());
        let full = truncated_svd::<f64, _>(&x, 8, SvdMethod::Exact)?;
        let energy: f64 = full.singular_values.iter().map(|s| s * s).sum();
        ensure!(rel_close(energy, x.frobenius_sq(), 1e-10), "singular energy differs from the Frobenius norm");
        for r in 1..8 {
            let v = truncated_svd::<f64, _>(&x, r, SvdMethod::Exact)?.v;
            let approx = x.matmul(&v).matmul(&v.transpose());
            let err = x.sub(&approx).frobenius_sq();
            let tail: f64 = full.singular_values[r..].iter().map(|s| s * s).sum();
            worst = worst.max((err - tail).abs());
        }
    }
    Ok(verdict(worst <= 1e-8, format!("max |error - tail energy| = {worst:.2e}")))
}

// 5.7 -----------------------------------------------------------------------

fn gp_conditional_oracle(x: &[Vec<f64>], y: &[f64], l: f64, noise: f64, at: &[f64]) -> (f64, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| var * matern52(dist(&x[i], &x[j]), l) + if i == j { var * noise } else { 0.0 }).collect())
        .collect();
    let kinv = invert(&k);
    let ks: Vec<f64> = x.iter().map(|xi| var * matern52(dist(xi, at), l)).collect();
    let alpha: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kinv[i][j] * (y[j] - mean)).sum()).collect();
    let m = mean + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| ks[i] * kinv[i][j] * ks[j]).sum::<f64>()).sum();
    (m, var - quad)
}

fn gp_and_bo() -> Result<Outcome> {
    let mut rng = SeedStream::new(3);
    let mut worst = 0.0f64;
    let mut min_ei = f64::INFINITY;
    for _ in 0..10 {
        let x: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.unit(), rng.unit()]).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let (l, noise) = (0.2 + rng.unit(), 1e-6);
        let gp = GaussianProcess::fit(&x, &y, l, noise)?;
        let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..200 {
            let at = [rng.unit(), rng.unit()];
            let (m, v) = gp.posterior(&at);
            let (mo, vo) = gp_conditional_oracle(&x, &y, l, noise, &at);
            worst = worst.max((m - mo).abs()).max((v - vo).abs());
            min_ei = min_ei.min(gp.expected_improvement(&at, best, 0.01));
        }
    }
    let space = SearchSpace::new(vec![("x".into(), ParamDomain::Continuous { lo: 0.0, hi: 1.0 })])?;
    let objective = |p: &recsys_evalkit::hyperopt::Params| -> recsys_evalkit::Result<f64> {
        let x = p["x"].as_f64().expect("real");
        Ok(-(x - 0.3) * (x - 0.3))
    };
    let mut found = 0;
    for seed in 0..20 {
        let trace = optimize(objective, &space, 30, Strategy::Bayesian, seed)?;
        let x = trace.best().expect("a successful trial").params["x"].as_f64().expect("real");
        found += usize::from((x - 0.3).abs() <= 0.05);
    }
    Ok(verdict(
        worst <= 1e-8 && min_ei >= 0.0 && found >= 18,
        format!("max posterior error {worst:.2e}, min EI {min_ei:.2e}, BO within 0.05 in {found}/20 seeds"),
    ))
}

// 5.8 -----------------------------------------------------------------------

fn binomial_tail(k: u64, n: u64) -> f64 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for i in 0..=k {
        if i > 0 {
            c = c * (n - i + 1) as u128 / i as u128;
        }
        total += c;
    }
    total as f64 / (1u128 << n) as f64
}

fn mcnemar() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in 1..=25u64 {
        for b in 0..=n {
            let r = mcnemar_from_counts(b, n - b, 0.01);
            ensure!(r.method == McNemarMethod::ExactBinomial, "n = {n} should be exact");
            let want = (2.0 * binomial_tail(b.min(n - b), n)).min(1.0);
            worst = worst.max((r.p_value - want).abs());
        }
    }
    let example = mcnemar_from_counts(10, 2, 0.05).p_value;
    let mut rng = SeedStream::new(8);
    for _ in 0..500 {
        let len = rng.below(300) as usize;
        let a: Vec<bool> = (0..len).map(|_| rng.unit() < 0.5).collect();
        let b: Vec<bool> = (0..len).map(|_| rng.unit() < 0.6).collect();
        ensure!(mcnemar_test(&a, &b, 0.01)? == swap(mcnemar_test(&b, &a, 0.01)?), "asymmetric result");
    }
    Ok(verdict(
        worst <= 1e-12 && (example - 0.0386).abs() < 1e-4,
        format!("max |p - tail sum| = {worst:.2e}, p(10, 2) = {example:.5}, swap symmetric on 500 samples"),
    ))
}

fn swap(mut r: recsys_evalkit::evalstats::TestResult) -> recsys_evalkit::evalstats::TestResult {
    std::mem::swap(&mut r.b, &mut r.c);
    r
}

// 5.9 -----------------------------------------------------------------------

fn bootstrap() -> Result<Outcome> {
    let flat = bootstrap_ci(&[0.42; 5], 0.95, 10_000, 1)?;
    ensure!(flat.lo == 0.42 && flat.hi == 0.42, "degenerate interval [{}, {}]", flat.lo, flat.hi);
    let (mu, sigma, k, reps) = (0.45, 0.02, 50, 1000);
    let mut rng = SeedStream::new(99);
    let mut covered = 0;
    for rep in 0..reps {
        let scores: Vec<f64> = (0..k).map(|_| mu + sigma * rng.normal()).collect();
        covered += usize::from(bootstrap_ci(&scores, 0.95, 1000, rep as u64)?.contains(mu));
    }
    let coverage = covered as f64 / reps as f64;
    Ok(verdict(
        (0.92..=0.98).contains(&coverage),
        format!("degenerate exact; coverage {coverage:.3} over {reps} replications of {k} fold scores"),
    ))
}

// 5.10 ----------------------------------------------------------------------

fn random_expectation() -> Result<Outcome> {
    let mut rng = SeedStream::new(21);
    let (users, items) = (400, 200);
    let mut xs = Vec::new();
    for u in 0..users {
        let mut pool: Vec<usize> = (0..items).collect();
        let deg = 10 + rng.below(30) as usize;
        rng.partial_shuffle(&mut pool, deg);
        for &i in &pool[..deg] {
            xs.push(Interaction::new(format!("u{u}"), format!("i{i}"), 1.0, None));
        }
    }
    let d = InteractionDataset::from_interactions(&xs)?;
    let k = 10;
    let mut config = NestedCvConfig::new(SplitPlan::new(5, 3, 1, 1)?, 4);
    config.primary = MetricSpec::hitrate(k);
    config.budget = 1;
    let family = ModelFamily::Random;
    let result = nested_cv::<f64>(&d, family, &family.search_space(), &config)?;
    let primary = result.primary();
    let (mut mean, mut expected, mut var, mut n) = (0.0, 0.0, 0.0, 0.0);
    for (fold_users, scores) in primary.users.iter().zip(&primary.per_user) {
        for (&u, &s) in fold_users.iter().zip(scores) {
            let candidates = d.n_items() - (d.user_items(u).len() - 1);
            let p = (k as f64 / candidates as f64).min(1.0);
            mean += s;
            expected += p;
            var += p * (1.0 - p);
            n += 1.0;
        }
    }
    let (mean, expected, sd) = (mean / n, expected / n, var.sqrt() / n);
    Ok(verdict(
        (mean - expected).abs() <= 3.0 * sd,
        format!("mean HitRate@{k} {mean:.4}, expected {expected:.4}, sigma {sd:.4}"),
    ))
}

// 5.11 ----------------------------------------------------------------------

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root)?.to_path_buf(), std::fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn synthetic_log(path: &Path) -> Result<()> {
    let mut rng = SeedStream::new(31);
    let mut text = String::new();
    for u in 0..150 {
        for i in 0..60 {
            let affinity = if (u % 3) == (i % 3) { 0.45 } else { 0.1 };
            if rng.unit() < affinity {
                let rating = 3 + rng.below(3);
                text.push_str(&format!("{u}\t{i}\t{rating}\t{}\n", 880_000_000 + u * 1000 + i));
            }
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn end_to_end_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("ratings.tsv");
    synthetic_log(&raw)?;
    let run = |name: &str| -> Result<(PathBuf, RunManifest)> {
        let out = dir.path().join(name);
        let mut config = config_for(&raw, &out);
        config.search.budget = 3;
        config.stats.n_resamples = 1000;
        cmd_preprocess(&config)?;
        cmd_run(&config)?;
        Ok((out.clone(), RunManifest::load(&out.join("manifests").join("run.json"))?))
    };
    let (a, ma) = run("a")?;
    let (b, mb) = run("b")?;
    ensure!(ma.same_run(&mb), "manifests differ");
    let mut files = 0;
    for sub in ["reports", "models"] {
        let (ta, tb) = (tree(&a.join(sub))?, tree(&b.join(sub))?);
        ensure!(ta.keys().eq(tb.keys()), "{sub}/ file lists differ");
        for (p, bytes) in &ta {
            ensure!(bytes == &tb[p], "{sub}/{} differs", p.display());
        }
        files += ta.len();
    }
    Ok(Outcome::Pass(format!("{} families, {files} report and model files byte-identical", ModelFamily::ALL.len())))
}

type Check = Box<dyn Fn() -> Result<Outcome>>;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        // cargo test --list probes harness-less targets
        return;
    }
    let run_ignored = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let criteria: Vec<(&str, &str, Check)> = vec![
        ("1", "ML100K preprocessing", Box::new(ml100k_preprocessing)),
        ("2", "ML100K temporal report", Box::new(ml100k_temporal)),
        ("3", "split-by-ratio simulation", Box::new(simulation)),
        ("4", "ML1M nested CV sanity", Box::new(move || ml1m_table_one(run_ignored))),
        ("5.1", "metric oracle", Box::new(metric_oracle)),
        ("5.2", "L-core properties", Box::new(l_core_properties)),
        ("5.3", "Ease closed form", Box::new(ease_closed_form)),
        ("5.4", "SLIM elastic net", Box::new(slim_oracle)),
        ("5.5", "ALS monotonicity", Box::new(als_monotone)),
        ("5.6", "PureSVD truncation error", Box::new(eckart_young)),
        ("5.7", "GP posterior, EI and BO", Box::new(gp_and_bo)),
        ("5.8", "McNemar", Box::new(mcnemar)),
        ("5.9", "bootstrap intervals", Box::new(bootstrap)),
        ("5.10", "Random expectation", Box::new(random_expectation)),
        ("5.11", "end-to-end determinism", Box::new(end_to_end_determinism)),
    ];
    let suite = Instant::now();
    let mut failed = 0;
    for (id, name, check) in &criteria {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::Fail(format!("error: {e:#}")));
        let t = start.elapsed();
        match outcome {
            Outcome::Pass(d) => println!("PASS {id:<5} {name}: {d} [{t:.1?}]"),
            Outcome::Skip(d) => println!("SKIP {id:<5} {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {id:<5} {name}: {d} [{t:.1?}]");
            }
        }
    }
    println!("acceptance: {} criteria, {failed} failed, {:.1?}", criteria.len(), suite.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
