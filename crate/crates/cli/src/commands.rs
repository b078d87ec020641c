//! Subcommands. Each reads its inputs through the configuration, writes
//! under the output directory and records a manifest in `manifests/`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use recsys_evalkit::data::{
    binarize, binarize_threshold, compute_stats, l_core, load_interactions, read_canonical, read_token_list,
    temporal_report, write_canonical, write_token_list, DatasetStats, Interaction, InteractionDataset, TemporalOptions,
    TemporalReport,
};
use recsys_evalkit::evalstats::{
    compare_reports, evaluate_users, nested_cv, simulate_split_by_ratio, CiSettings, Comparison, EvalReport,
    NestedCvConfig, SimulationTable, Target,
};
use recsys_evalkit::hyperopt::{normalize_study, optimize_with, Params, SearchSpace, SearchTrace, Strategy};
use recsys_evalkit::models::{fit_in, write_model, FittedModel, ModelFamily, ModelSpec};
use recsys_evalkit::rng::derive_seed;
use recsys_evalkit::splitting::{assign_user_folds, build_inner_fold_data, split_manifest, FoldData, SplitManifest};
use recsys_evalkit::Scalar;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelConfig, Precision};
use crate::manifest::RunManifest;
use crate::sidecar::ScoreTable;

/// Significant digits of the numbers in JSON reports.
pub const REPORT_DIGITS: i32 = 6;

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn remove_if_present(path: &Path) -> Result<()> {
    let result = if path.is_dir() { fs::remove_dir_all(path) } else { fs::remove_file(path) };
    match result {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
            Err(e).with_context(|| format!("removing {}", path.display()))
        }
        _ => Ok(()),
    }
}

fn token_paths(processed: &Path) -> (PathBuf, PathBuf) {
    (processed.with_extension("users.txt"), processed.with_extension("items.txt"))
}

/// Raw log through binarization and the L-core.
struct Prepared {
    raw: Vec<Interaction>,
    skipped_rows: usize,
    threshold: u32,
    binarized: InteractionDataset,
    core: InteractionDataset,
}

fn prepare(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<Prepared> {
    let d = &config.dataset;
    let path = d.path.as_deref().context("dataset.path is required")?;
    manifest.add_input(path)?;
    let schema = d.schema.resolve()?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let loaded = load_interactions(file, &schema).with_context(|| format!("loading {}", path.display()))?;
    if loaded.skipped > 0 {
        log::warn!("skipped {} malformed rows of {}", loaded.skipped, path.display());
    }
    let threshold = binarize_threshold(d.scale_levels)?;
    let positives = binarize(&loaded.interactions, d.scale_levels)?;
    if positives.is_empty() {
        bail!("no rating reaches the positive threshold {threshold} of a {}-level scale", d.scale_levels);
    }
    let binarized = InteractionDataset::from_interactions(&positives)?;
    let core = l_core(&binarized, d.l)?;
    if core.is_empty() {
        bail!("the {}-core of {} is empty; lower dataset.L", d.l, path.display());
    }
    Ok(Prepared { raw: loaded.interactions, skipped_rows: loaded.skipped, threshold, binarized, core })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub dataset: String,
    pub skipped_rows: usize,
    /// Ratings at or above this value are positives.
    pub threshold: u32,
    #[serde(rename = "L")]
    pub l: usize,
    pub binarized: DatasetStats,
    pub filtered: DatasetStats,
}

/// Binarizes and filters the raw log, then writes the canonical dataset, its
/// token lists and `stats.json` next to it.
pub fn cmd_preprocess(config: &ExperimentConfig) -> Result<PreprocessSummary> {
    let start = Instant::now();
    let mut manifest = RunManifest::begin("preprocess", config);
    let p = prepare(config, &mut manifest)?;
    let summary = PreprocessSummary {
        dataset: config.dataset.label(),
        skipped_rows: p.skipped_rows,
        threshold: p.threshold,
        l: config.dataset.l,
        binarized: compute_stats(&p.binarized)?,
        filtered: compute_stats(&p.core)?,
    };
    let path = config.processed_path();
    let (users, items) = token_paths(&path);
    let mut out = create(&path)?;
    write_canonical(&p.core, &mut out)?;
    out.flush()?;
    let mut out = create(&users)?;
    write_token_list(p.core.user_tokens(), &mut out)?;
    out.flush()?;
    let mut out = create(&items)?;
    write_token_list(p.core.item_tokens(), &mut out)?;
    out.flush()?;
    write_json(&path.with_file_name("stats.json"), &summary)?;
    let f = &summary.filtered;
    log::info!(
        "{}: {} users, {} items, {} ratings after the {}-core ({:.2?})",
        summary.dataset,
        f.users,
        f.items,
        f.ratings,
        summary.l,
        start.elapsed()
    );
    manifest.finish(&config.output.dir)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalVariant {
    /// `raw` (every parsed rating) or `filtered` (the L-core).
    pub source: String,
    pub report: TemporalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub dataset: String,
    pub raw: DatasetStats,
    pub binarized: DatasetStats,
    pub filtered: DatasetStats,
    /// Every source crossed with both day-boundary conventions.
    pub temporal: Vec<TemporalVariant>,
}

/// Dataset statistics and arrival rates, written to `stats/stats.json`.
pub fn cmd_stats(config: &ExperimentConfig) -> Result<StatsSummary> {
    let mut manifest = RunManifest::begin("stats", config);
    let p = prepare(config, &mut manifest)?;
    let raw = InteractionDataset::from_interactions(&p.raw)?;
    let filtered: Vec<Interaction> = p.core.interactions().collect();
    let mut temporal = Vec::new();
    if p.raw.iter().all(|x| x.timestamp.is_some()) {
        for (source, xs) in [("raw", &p.raw), ("filtered", &filtered)] {
            for exclude_initial_day in [false, true] {
                let report = temporal_report(xs, TemporalOptions { exclude_initial_day })?;
                temporal.push(TemporalVariant { source: source.into(), report });
            }
        }
    } else {
        log::warn!("the log has no timestamps; skipping arrival rates");
    }
    let summary = StatsSummary {
        dataset: config.dataset.label(),
        raw: compute_stats(&raw)?,
        binarized: compute_stats(&p.binarized)?,
        filtered: compute_stats(&p.core)?,
        temporal,
    };
    write_json(&config.output.dir.join("stats").join("stats.json"), &summary)?;
    manifest.finish(&config.output.dir)?;
    Ok(summary)
}

/// Reads the preprocessed dataset and returns it with its SHA-256.
pub fn load_processed(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<(InteractionDataset, String)> {
    let path = config.processed_path();
    if !path.exists() {
        bail!("processed dataset {} not found; run `preprocess` first", path.display());
    }
    let digest = manifest.add_input(&path)?;
    let (users, items) = token_paths(&path);
    let tokens = if users.exists() && items.exists() {
        manifest.add_input(&users)?;
        manifest.add_input(&items)?;
        Some((read_token_list(File::open(&users)?)?, read_token_list(File::open(&items)?)?))
    } else {
        None
    };
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let dataset = read_canonical(BufReader::new(file), tokens).with_context(|| format!("reading {}", path.display()))?;
    Ok((dataset, digest))
}

/// Writes the user folds and held-out items to `split/manifest.json`.
pub fn cmd_split(config: &ExperimentConfig) -> Result<SplitManifest> {
    let mut manifest = RunManifest::begin("split", config);
    let (dataset, _) = load_processed(config, &mut manifest)?;
    let plan = config.split.plan()?;
    let split = split_manifest(&dataset, &plan)?;
    let skipped = dataset.n_users() - split.held_out.len();
    if skipped > 0 {
        log::warn!("{skipped} users have fewer than {} items and are never evaluated", plan.min_profile());
    }
    write_json(&config.output.dir.join("split").join("manifest.json"), &split)?;
    manifest.finish(&config.output.dir)?;
    Ok(split)
}

fn nested_config(config: &ExperimentConfig) -> Result<NestedCvConfig> {
    let mut ncv = NestedCvConfig::new(config.split.plan()?, config.seed);
    ncv.strategy = config.search.strategy;
    ncv.budget = config.search.budget;
    ncv.primary = config.metrics.primary;
    ncv.report = config.metrics.report.clone();
    ncv.fit = config.fit.options;
    ncv.bo = config.search.bo();
    Ok(ncv)
}

struct Study {
    report: EvalReport,
    table: ScoreTable,
    models: Vec<Vec<u8>>,
}

struct StudyInputs<'a> {
    dataset: &'a InteractionDataset,
    label: String,
    dataset_digest: String,
    config_digest: String,
    ncv: NestedCvConfig,
    ci: CiSettings,
}

fn study<T: Scalar>(inputs: &StudyInputs, family: ModelFamily, space: &SearchSpace) -> Result<Study> {
    let result = nested_cv::<T>(inputs.dataset, family, space, &inputs.ncv)?;
    let report =
        EvalReport::from_result(&result, &inputs.label, &inputs.dataset_digest, &inputs.config_digest, &inputs.ci)?;
    let models = result
        .folds
        .iter()
        .map(|f| {
            let mut buf = Vec::new();
            write_model(&f.model, &mut buf)?;
            Ok(buf)
        })
        .collect::<Result<_>>()?;
    Ok(Study { report, table: ScoreTable::from_result(&result), models })
}

fn run_model(inputs: &StudyInputs, model: &ModelConfig, precision: Precision) -> Result<Study> {
    let family = model.family()?;
    let space = model.search_space()?;
    let start = Instant::now();
    let s = match precision {
        Precision::F32 => study::<f32>(inputs, family, &space),
        Precision::F64 => study::<f64>(inputs, family, &space),
    }?;
    log::info!(
        "{family}: {} = {:.4} [{:.4}, {:.4}] ({:.1?})",
        s.report.metric,
        s.report.mean,
        s.report.ci.lo,
        s.report.ci.hi,
        start.elapsed()
    );
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Full-precision reports of the successful studies.
    pub reports: Vec<EvalReport>,
    /// Family name and error of each failed study.
    pub failures: Vec<(String, String)>,
}

/// Nested cross-validation for every configured family. Writes
/// `reports/<Family>.json` (rounded), `reports/<Family>.scores.bin` (full
/// precision), `reports/scores_table.csv` and `models/<Family>/fold<i>.model`.
/// A failed study leaves only `failed/<Family>/error.txt`; any failure makes
/// the command fail after the other studies are written.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunSummary> {
    let mut manifest = RunManifest::begin("run", config);
    let (dataset, dataset_digest) = load_processed(config, &mut manifest)?;
    let inputs = StudyInputs {
        dataset: &dataset,
        label: config.dataset.label(),
        dataset_digest,
        config_digest: config.digest(),
        ncv: nested_config(config)?,
        ci: CiSettings {
            level: config.stats.ci_level,
            n_resamples: config.stats.n_resamples,
            seed: config.seed,
            per_user: config.stats.per_user_bootstrap,
        },
    };
    // studies and their folds share one worker pool
    let outcomes: Vec<(String, Result<Study>)> = config
        .models
        .par_iter()
        .map(|m| (m.family().map_or_else(|_| m.family.clone(), |f| f.name().to_string()), run_model(&inputs, m, config.fit.precision)))
        .collect();

    let out = &config.output.dir;
    let reports_dir = out.join("reports");
    let mut summary = RunSummary { reports: Vec::new(), failures: Vec::new() };
    let mut table = String::from("model,metric,fold,score\n");
    for (name, outcome) in outcomes {
        for stale in [
            reports_dir.join(format!("{name}.json")),
            reports_dir.join(format!("{name}.scores.bin")),
            out.join("models").join(&name),
            out.join("failed").join(&name),
        ] {
            remove_if_present(&stale)?;
        }
        match outcome {
            Ok(s) => {
                write_json(&reports_dir.join(format!("{name}.json")), &s.report.rounded(REPORT_DIGITS))?;
                let mut w = create(&reports_dir.join(format!("{name}.scores.bin")))?;
                s.table.write(&mut w)?;
                w.flush()?;
                for (i, bytes) in s.models.iter().enumerate() {
                    write_bytes(&out.join("models").join(&name).join(format!("fold{i}.model")), bytes)?;
                }
                for (fold, score) in s.report.fold_scores.iter().enumerate() {
                    table.push_str(&format!("{name},{},{fold},{score}\n", s.report.metric));
                }
                for (metric, scores) in &s.report.report_metrics {
                    for (fold, score) in scores.iter().enumerate() {
                        table.push_str(&format!("{name},{metric},{fold},{score}\n"));
                    }
                }
                summary.reports.push(s.report);
            }
            Err(e) => {
                log::error!("{name} failed: {e:#}");
                write_bytes(&out.join("failed").join(&name).join("error.txt"), format!("{e:#}\n").as_bytes())?;
                summary.failures.push((name, format!("{e:#}")));
            }
        }
    }
    write_bytes(&reports_dir.join("scores_table.csv"), table.as_bytes())?;
    manifest.finish(out)?;
    if !summary.failures.is_empty() {
        let names: Vec<&str> = summary.failures.iter().map(|(n, _)| n.as_str()).collect();
        bail!("{} of {} studies failed: {}", names.len(), config.models.len(), names.join(", "));
    }
    Ok(summary)
}

/// Compares two reports, writing `compare/<A>_vs_<B>.json`.
pub fn cmd_compare(config: &ExperimentConfig, report_a: &Path, report_b: &Path) -> Result<Comparison> {
    let mut manifest = RunManifest::begin("compare", config);
    manifest.add_input(report_a)?;
    manifest.add_input(report_b)?;
    let a: EvalReport = read_json(report_a)?;
    let b: EvalReport = read_json(report_b)?;
    let c = compare_reports(&a, &b, config.stats.alpha)?;
    let path = config.output.dir.join("compare").join(format!("{}_vs_{}.json", a.model, b.model));
    write_json(&path, &c)?;
    if let Some(t) = &c.pooled_test {
        log::info!("{} vs {}: {:?}, pooled McNemar p = {:.4}", a.model, b.model, c.verdict, t.p_value);
    } else {
        log::info!("{} vs {}: {:?}", a.model, b.model, c.verdict);
    }
    manifest.finish(&config.output.dir)?;
    Ok(c)
}

/// Writes the split-by-ratio simulation to `simulate/simulation.csv`.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulationTable> {
    let manifest = RunManifest::begin("simulate", config);
    let table = simulate_split_by_ratio(&config.simulate)?;
    let mut w = create(&config.output.dir.join("simulate").join("simulation.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    manifest.finish(&config.output.dir)?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct TraceSummary {
    pub family: ModelFamily,
    /// In [`Strategy::ALL`] order.
    pub traces: Vec<SearchTrace>,
    /// Best-so-far over the best score of all three searches.
    pub normalized: Vec<Vec<Option<f64>>>,
}

fn trace_search<T: Scalar>(
    config: &ExperimentConfig,
    inner: &FoldData,
    family: ModelFamily,
    space: &SearchSpace,
    strategy: Strategy,
) -> Result<SearchTrace> {
    let fold_bytes = (config.trace.fold as u64).to_le_bytes();
    let model_seed = derive_seed(config.seed, &[b"model", &fold_bytes]);
    let search_seed = derive_seed(config.seed, &[b"search", &fold_bytes]);
    let objective = |params: &Params| -> recsys_evalkit::Result<f64> {
        let spec = ModelSpec::new(family, params.clone(), model_seed);
        let model: FittedModel<T> = fit_in(&spec, space, &inner.train, &config.fit.options)?;
        let (scores, _) = evaluate_users(&model, &inner.eval_users, Target::Validation, &[config.metrics.primary])?;
        Ok(scores[0].iter().sum::<f64>() / scores[0].len() as f64)
    };
    Ok(optimize_with(objective, space, config.search.budget, strategy, search_seed, &config.search.bo())?)
}

/// Runs all three search strategies on the inner split of one outer fold and
/// writes `traces/<Family>_<strategy>.csv` plus `traces/<Family>_normalized.csv`.
pub fn cmd_trace(config: &ExperimentConfig) -> Result<TraceSummary> {
    let mut manifest = RunManifest::begin("trace", config);
    let model = match &config.trace.model {
        Some(name) => {
            let family: ModelFamily = name.parse()?;
            config
                .models
                .iter()
                .find(|m| m.family().ok() == Some(family))
                .cloned()
                .unwrap_or_else(|| ModelConfig::new(family))
        }
        None => config.models.first().cloned().context("no models configured")?,
    };
    let family = model.family()?;
    let space = model.search_space()?;
    let (dataset, _) = load_processed(config, &mut manifest)?;
    let plan = config.split.plan()?;
    ensure!(plan.n_val >= 1, "tracing needs n_val >= 1 for the inner validation split");
    let assignment = assign_user_folds(dataset.n_users(), plan.k, plan.seed)?;
    let inner = build_inner_fold_data(&dataset, &assignment, config.trace.fold, &plan)?;
    let traces = Strategy::ALL
        .iter()
        .map(|&s| match config.fit.precision {
            Precision::F32 => trace_search::<f32>(config, &inner, family, &space, s),
            Precision::F64 => trace_search::<f64>(config, &inner, family, &space, s),
        })
        .collect::<Result<Vec<_>>>()?;
    let normalized = normalize_study(&traces)?;

    let dir = config.output.dir.join("traces");
    for t in &traces {
        let mut w = create(&dir.join(format!("{family}_{}.csv", t.strategy)))?;
        t.write_csv(&space, &mut w)?;
        w.flush()?;
    }
    let rows = normalized.iter().map(Vec::len).max().unwrap_or(0);
    let mut csv = format!("iteration,{}\n", Strategy::ALL.map(Strategy::name).join(","));
    for i in 0..rows {
        let cells: Vec<String> = normalized
            .iter()
            .map(|c| c.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default())
            .collect();
        csv.push_str(&format!("{i},{}\n", cells.join(",")));
    }
    write_bytes(&dir.join(format!("{family}_normalized.csv")), csv.as_bytes())?;
    for (t, n) in traces.iter().zip(&normalized) {
        let last = n.iter().rev().find_map(|v| *v).unwrap_or(f64::NAN);
        log::info!("{family} {}: {} trials, final relative score {last:.4}", t.strategy, t.trials.len());
    }
    manifest.finish(&config.output.dir)?;
    Ok(TraceSummary { family, traces, normalized })
}
