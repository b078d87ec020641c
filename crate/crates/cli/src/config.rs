//! Experiment configuration. Every key is optional; an empty file yields the
//! default protocol: 5-core filtering of a 5-level scale binarized at 4, five
//! user folds with one validation and one test item, 50 Bayesian search
//! iterations per study and HitRate@50 as the primary metric.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use recsys_evalkit::data::Schema;
use recsys_evalkit::evalstats::{SimulationConfig, DEFAULT_ALPHA, DEFAULT_RESAMPLES};
use recsys_evalkit::hyperopt::{BoConfig, ParamDomain, SearchSpace, Strategy, DEFAULT_BUDGET};
use recsys_evalkit::metrics::{MetricKind, MetricSpec};
use recsys_evalkit::models::{FitOptions, ModelFamily};
use recsys_evalkit::splitting::SplitPlan;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds model initialization, search and simulation.
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub models: Vec<ModelConfig>,
    pub search: SearchConfig,
    pub metrics: MetricsConfig,
    pub stats: StatsConfig,
    pub fit: FitConfig,
    pub simulate: SimulationConfig,
    pub trace: TraceConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetConfig::default(),
            split: SplitConfig::default(),
            models: ModelFamily::ALL.iter().map(|&f| ModelConfig::new(f)).collect(),
            search: SearchConfig::default(),
            metrics: MetricsConfig::default(),
            stats: StatsConfig::default(),
            fit: FitConfig::default(),
            simulate: SimulationConfig::default(),
            trace: TraceConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Either a named preset (`"ml100k"`, `"ml1m"`) or an explicit column mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaConfig {
    Preset(String),
    Custom(Schema),
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig::Preset("ml100k".into())
    }
}

impl SchemaConfig {
    pub fn resolve(&self) -> Result<Schema> {
        match self {
            SchemaConfig::Custom(s) => Ok(s.clone()),
            SchemaConfig::Preset(p) => match p.to_ascii_lowercase().as_str() {
                "ml100k" | "ml-100k" => Ok(Schema::ml100k()),
                "ml1m" | "ml-1m" => Ok(Schema::ml1m()),
                other => bail!("unknown schema preset {other:?} (expected ml100k or ml1m)"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Raw interaction log.
    pub path: Option<PathBuf>,
    /// Label used in reports; defaults to the raw file's parent directory name.
    pub name: Option<String>,
    pub schema: SchemaConfig,
    /// Number of rating levels; ratings of at least `ceil(4n/5)` become positives.
    pub scale_levels: u32,
    /// L-core threshold.
    #[serde(rename = "L", alias = "l")]
    pub l: usize,
    /// Processed dataset in canonical format; defaults to `<out>/processed/dataset.tsv`.
    pub processed: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { path: None, name: None, schema: SchemaConfig::default(), scale_levels: 5, l: 5, processed: None }
    }
}

impl DatasetConfig {
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        self.path
            .as_deref()
            .and_then(|p| p.parent().and_then(Path::file_name).or_else(|| p.file_stem()))
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub k: usize,
    pub seed: u64,
    pub n_val: usize,
    pub n_test: usize,
    pub temporal: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0, n_val: 1, n_test: 1, temporal: false }
    }
}

impl SplitConfig {
    pub fn plan(&self) -> Result<SplitPlan> {
        let mut plan = SplitPlan::new(self.k, self.seed, self.n_val, self.n_test)?;
        plan.temporal_holdout = self.temporal;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    /// Replacements for individual search dimensions.
    #[serde(default)]
    pub space: BTreeMap<String, ParamDomain>,
}

impl ModelConfig {
    pub fn new(family: ModelFamily) -> Self {
        Self { family: family.name().to_string(), space: BTreeMap::new() }
    }

    pub fn family(&self) -> Result<ModelFamily> {
        Ok(self.family.parse()?)
    }

    /// The family's search space with the overrides applied.
    pub fn search_space(&self) -> Result<SearchSpace> {
        let family = self.family()?;
        let mut space = family.search_space();
        for (name, domain) in &self.space {
            space = space
                .with_override(name, domain.clone())
                .with_context(|| format!("override of {name:?} for {family}"))?;
        }
        Ok(space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub n_init: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { strategy: Strategy::Bayesian, budget: DEFAULT_BUDGET, n_init: BoConfig::default().n_init }
    }
}

impl SearchConfig {
    pub fn bo(&self) -> BoConfig {
        BoConfig { n_init: self.n_init, ..BoConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Optimized on validation items.
    pub primary: MetricSpec,
    /// Reported on test items; must include the primary metric.
    pub report: Vec<MetricSpec>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let recall = |k| MetricSpec::new(MetricKind::Recall, k).expect("positive cutoff");
        Self { primary: MetricSpec::hitrate(50), report: vec![MetricSpec::hitrate(50), recall(10), recall(25), recall(50)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub ci_level: f64,
    pub n_resamples: usize,
    pub alpha: f64,
    /// Also bootstrap over pooled test users.
    pub per_user_bootstrap: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { ci_level: 0.95, n_resamples: DEFAULT_RESAMPLES, alpha: DEFAULT_ALPHA, per_user_bootstrap: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

// serde cannot deny unknown fields next to a flattened struct
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub precision: Precision,
    #[serde(flatten)]
    pub options: FitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { precision: Precision::F64, options: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Family whose search is traced; defaults to the first configured model.
    pub model: Option<String>,
    /// Outer fold whose inner split hosts the search.
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("parsing configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The file at `path`, or the default protocol without one.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Applies command-line overrides. A seed reseeds models, split and
    /// simulation alike.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.split.seed = s;
            self.simulate.seed = s;
        }
        if let Some(dir) = out {
            self.output.dir = dir;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.split.plan()?;
        self.dataset.schema.resolve()?;
        if self.dataset.l == 0 {
            bail!("dataset.L must be at least 1");
        }
        if self.search.budget == 0 {
            bail!("search.budget must be at least 1");
        }
        if !self.metrics.report.contains(&self.metrics.primary) {
            bail!("primary metric {} must appear in metrics.report", self.metrics.primary);
        }
        if self.models.is_empty() {
            bail!("no models configured");
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            m.search_space()?;
            if !seen.insert(m.family()?) {
                bail!("model {} is configured twice", m.family);
            }
        }
        if let Some(t) = &self.trace.model {
            t.parse::<ModelFamily>()?;
        }
        if self.trace.fold >= self.split.k {
            bail!("trace.fold {} out of range for k = {}", self.trace.fold, self.split.k);
        }
        Ok(())
    }

    /// Canonical JSON of the configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded. The output location is
    /// left out so that the same experiment run into two directories yields
    /// identical reports.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        hex::encode(Sha256::digest(c.canonical_json().as_bytes()))
    }

    pub fn processed_path(&self) -> PathBuf {
        self.dataset.processed.clone().unwrap_or_else(|| self.output.dir.join("processed").join("dataset.tsv"))
    }
}
