//! The run configuration: one JSON document, every field defaulted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use robustcheck_core::aggregation::EnsembleConfig;
use robustcheck_core::attributions::ExplainConfig;
use robustcheck_core::data::{synthetic, PreprocessConfig, SplitSizes};
use robustcheck_core::neighbourhood::{MedoidConfig, MedoidGrid, RandomConfig, RandomGrid, Scheme};
use robustcheck_core::nn::TrainConfig;
use robustcheck_core::robustness::{Explainer, DEFAULT_INFLECTION_TOLERANCE};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Minimum neighbourhood size.
pub const MIN_NEIGHBOURHOOD: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    /// A CSV file described by a schema JSON file.
    Csv { path: PathBuf, schema: PathBuf },
    /// One of the built-in generators; the seed defaults to a sub-stream of
    /// the master seed.
    Synthetic {
        name: String,
        rows: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeighbourhoodSettings {
    pub schemes: Vec<Scheme>,
    pub n: usize,
    /// Used as-is when `tune` is false.
    pub random: RandomConfig,
    pub medoid: MedoidConfig,
    pub tune: bool,
    pub tune_sample: usize,
    pub retention_target: f64,
    pub random_grid: RandomGrid,
    pub medoid_grid: MedoidGrid,
    /// Medoid count is `ceil(|valid| / n_k)` unless `k_medoids` is set.
    pub n_k: usize,
    pub k_medoids: Option<usize>,
    pub write_neighbourhoods: bool,
}

impl Default for NeighbourhoodSettings {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Random, Scheme::Medoid],
            n: MIN_NEIGHBOURHOOD,
            random: RandomConfig::default(),
            medoid: MedoidConfig::default(),
            tune: true,
            tune_sample: 50,
            retention_target: 0.95,
            random_grid: RandomGrid::default(),
            medoid_grid: MedoidGrid::default(),
            n_k: 10,
            k_medoids: None,
            write_neighbourhoods: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustSettings {
    /// Fixed k_R; selected by leave-one-out over `k_r_candidates` when absent.
    pub k_r: Option<usize>,
    pub k_r_candidates: Vec<usize>,
    /// Fixed threshold; selected from the robust-count curve when absent.
    pub r_th: Option<f64>,
    /// Noise floor of the threshold search, as a fraction of the points.
    pub inflection_tolerance: f64,
}

impl Default for TrustSettings {
    fn default() -> Self {
        Self { k_r: None, k_r_candidates: vec![1, 3, 5, 7, 9, 11, 15], r_th: None, inflection_tolerance: DEFAULT_INFLECTION_TOLERANCE }
    }
}

pub fn default_models() -> Vec<TrainConfig> {
    [vec![32, 16], vec![64, 32, 16], vec![16]]
        .into_iter()
        .map(|hidden_dims| TrainConfig { hidden_dims, ..TrainConfig::default() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub version: u32,
    pub dataset: DatasetSource,
    pub split: SplitSizes,
    pub preprocess: PreprocessConfig,
    /// Models 1, 2 and 3. Their `seed` fields are replaced by sub-streams of
    /// the master seed.
    pub models: Vec<TrainConfig>,
    pub explain: ExplainConfig,
    pub neighbourhood: NeighbourhoodSettings,
    pub ensemble: EnsembleConfig,
    pub trust: TrustSettings,
    pub explainers: Vec<Explainer>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            dataset: DatasetSource::Synthetic { name: "blobs".into(), rows: 600, seed: None },
            split: SplitSizes::Fractions { train: 0.6, valid: 0.2, test: 0.2 },
            preprocess: PreprocessConfig::default(),
            models: default_models(),
            explain: ExplainConfig::default(),
            neighbourhood: NeighbourhoodSettings::default(),
            ensemble: EnsembleConfig::default(),
            trust: TrustSettings::default(),
            explainers: Explainer::ALL.to_vec(),
            seed: 0,
            out_dir: PathBuf::from("run"),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub explainers: Option<Vec<Explainer>>,
    pub scheme: Option<Scheme>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Reads the file; relative dataset paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSource::Csv { path, schema } = &mut cfg.dataset {
            for p in [path, schema] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(ex) = &o.explainers {
            self.explainers = ex.clone();
        }
        if let Some(s) = o.scheme {
            self.neighbourhood.schemes = vec![s];
        }
    }

    /// Requested explainers in canonical order, always including both
    /// aggregations.
    pub fn resolved_explainers(&self) -> Vec<Explainer> {
        let mut set: BTreeSet<Explainer> = self.explainers.iter().copied().collect();
        set.insert(Explainer::Ensemble);
        set.insert(Explainer::Mean);
        set.into_iter().collect()
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        let mut s = self.neighbourhood.schemes.clone();
        s.sort_by_key(|s| s.name());
        s.dedup();
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let nb = &self.neighbourhood;
        if nb.n < MIN_NEIGHBOURHOOD {
            return bad(format!("neighbourhood.n = {} is below the minimum of {MIN_NEIGHBOURHOOD}", nb.n));
        }
        if nb.schemes.is_empty() {
            return bad("neighbourhood.schemes is empty".into());
        }
        if nb.tune && (nb.tune_sample == 0 || !(0.0..=1.0).contains(&nb.retention_target)) {
            return bad("tuning needs tune_sample >= 1 and retention_target in [0, 1]".into());
        }
        if nb.n_k == 0 || nb.k_medoids == Some(0) {
            return bad("n_k and k_medoids must be positive".into());
        }
        nb.random.validate().map_err(CliError::from_core_config)?;
        nb.medoid.validate().map_err(CliError::from_core_config)?;
        if self.models.len() != 3 {
            return bad(format!("exactly three models are required, got {}", self.models.len()));
        }
        self.explain.validate().map_err(CliError::from_core_config)?;
        self.ensemble.validate().map_err(CliError::from_core_config)?;
        let t = &self.trust;
        if t.k_r == Some(0) || (t.k_r.is_none() && (t.k_r_candidates.is_empty() || t.k_r_candidates.contains(&0))) {
            return bad("k_r and its candidates must be positive".into());
        }
        if !(0.0..1.0).contains(&t.inflection_tolerance) {
            return bad("trust.inflection_tolerance must lie in [0, 1)".into());
        }
        if let Some(r) = t.r_th {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("r_th = {r} must lie in [0, 1]"));
            }
        }
        match &self.dataset {
            DatasetSource::Csv { path, schema } => {
                for p in [path, schema] {
                    if !p.is_file() {
                        return bad(format!("dataset file {} does not exist", p.display()));
                    }
                }
            }
            DatasetSource::Synthetic { name, rows, .. } => {
                if !synthetic::NAMES.contains(&name.as_str()) {
                    return bad(format!("unknown synthetic dataset `{name}`; known: {}", synthetic::NAMES.join(", ")));
                }
                if *rows < 10 {
                    return bad("synthetic datasets need at least 10 rows".into());
                }
            }
        }
        Ok(())
    }
}
