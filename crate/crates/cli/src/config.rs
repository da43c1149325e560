//! Experiment configuration: a single TOML file with a documented key set,
//! plus a handful of command-line overrides (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cicl_core::corpus::FilterPolicy;
use cicl_core::curriculum::{FewShotPlan, Heuristic};
use cicl_core::embeddings::{EmbeddingMode, NonceConfig, SgConfig, SubwordConfig};
use cicl_core::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    #[serde(default)]
    pub prepare: PrepareConfig,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub update: UpdateConfig,
    #[serde(default)]
    pub experiment: ExperimentGrid,
    #[serde(default)]
    pub fewshot: FewshotConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub targets: PathBuf,
    /// Informativeness scores TSV (sentence_id, raw, normalized, n_ratings).
    /// Exactly one of `scores` and `scorer_model` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    /// Trained scorer model dump used to score target sentences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer_model: Option<PathBuf>,
    /// Ingested-backbone TSV, required when the scorer model uses one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingested_vectors: Option<PathBuf>,
    /// Similarity task TSVs; the file stem names the task in reports.
    pub similarity_tasks: Vec<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepareConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub min_sentences_per_target: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        let p = FilterPolicy::default();
        PrepareConfig {
            min_len: p.min_len,
            max_len: p.max_len,
            min_sentences_per_target: p.min_sentences_per_target,
        }
    }
}

impl PrepareConfig {
    pub fn policy(&self) -> FilterPolicy {
        FilterPolicy {
            min_len: self.min_len,
            max_len: self.max_len,
            min_sentences_per_target: self.min_sentences_per_target,
            require_single_occurrence: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    /// Down-sample each target to exactly this many scored sentences.
    pub per_target: usize,
    pub seed: u64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            per_target: 512,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub mode: String,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub alpha: f64,
    pub subsample: f64,
    pub min_count: u64,
    pub epochs: usize,
    pub seed: u64,
    pub unigram_power: f64,
    pub bucket_count: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let sg = SgConfig::default();
        let sub = SubwordConfig::default();
        EmbeddingConfig {
            mode: "word2vec".to_string(),
            dim: sg.dim,
            window: sg.window,
            negatives: sg.negatives,
            alpha: sg.alpha,
            subsample: sg.subsample_t,
            min_count: sg.min_count,
            epochs: sg.epochs,
            seed: sg.seed,
            unigram_power: sg.unigram_power,
            bucket_count: sub.bucket_count,
            n_min: sub.n_min,
            n_max: sub.n_max,
        }
    }
}

impl EmbeddingConfig {
    pub fn sg_config(&self) -> Result<SgConfig> {
        Ok(SgConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            alpha: self.alpha,
            subsample_t: self.subsample,
            min_count: self.min_count,
            epochs: self.epochs,
            seed: self.seed,
            unigram_power: self.unigram_power,
            mode: EmbeddingMode::parse(&self.mode)?,
            subword: SubwordConfig {
                n_min: self.n_min,
                n_max: self.n_max,
                bucket_count: self.bucket_count,
            },
        })
    }
}

/// Overrides applied to the embedding config for curriculum updates.
/// Subsampling is off by default here: update corpora are tiny, so their
/// frequency estimates are meaningless.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UpdateConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub subsample: f64,
    pub min_count: u64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            alpha: 0.025,
            epochs: 5,
            subsample: 1.0,
            min_count: 0,
        }
    }
}

impl UpdateConfig {
    pub fn apply(&self, base: &SgConfig, seed: u64) -> SgConfig {
        SgConfig {
            alpha: self.alpha,
            epochs: self.epochs,
            subsample_t: self.subsample,
            min_count: self.min_count,
            seed,
            ..base.clone()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentGrid {
    pub heuristics: Vec<String>,
    /// Sentences per target word; the classic grid is 2^1 … 2^9.
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            heuristics: Heuristic::ALL.iter().map(|h| h.name().to_string()).collect(),
            ks: (1..=9).map(|i| 1usize << i).collect(),
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl ExperimentGrid {
    pub fn heuristics(&self) -> Result<Vec<Heuristic>> {
        self.heuristics.iter().map(|h| Heuristic::parse(h)).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FewshotConfig {
    pub background_fraction: f64,
    pub pool_size: usize,
    pub exclusion: usize,
    pub shots: Vec<usize>,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    pub pool_seed: u64,
    pub heuristics: Vec<String>,
    pub nonce_lr: f64,
    pub nonce_epochs: usize,
    pub nonce_window: usize,
    pub nonce_negatives: usize,
    pub nonce_decay: f64,
}

impl Default for FewshotConfig {
    fn default() -> Self {
        let plan = FewShotPlan::default();
        let nonce = NonceConfig::default();
        FewshotConfig {
            background_fraction: plan.background_fraction,
            pool_size: plan.pool_size,
            exclusion: plan.exclusion,
            shots: vec![2, 4, 6],
            seeds: (1..=10).collect(),
            split_seed: 1,
            pool_seed: 2,
            heuristics: Heuristic::ALL.iter().map(|h| h.name().to_string()).collect(),
            nonce_lr: nonce.learning_rate,
            nonce_epochs: nonce.epochs,
            nonce_window: nonce.window,
            nonce_negatives: nonce.negatives,
            nonce_decay: nonce.decay,
        }
    }
}

impl FewshotConfig {
    pub fn plan(&self, shots: usize) -> FewShotPlan {
        FewShotPlan {
            background_fraction: self.background_fraction,
            pool_size: self.pool_size,
            exclusion: self.exclusion,
            shots,
            seed: self.split_seed,
        }
    }

    pub fn nonce_config(&self) -> NonceConfig {
        NonceConfig {
            learning_rate: self.nonce_lr,
            epochs: self.nonce_epochs,
            window: self.nonce_window,
            negatives: self.nonce_negatives,
            min_count: 1,
            sample: 10_000.0,
            decay: self.nonce_decay,
        }
    }

    pub fn heuristics(&self) -> Result<Vec<Heuristic>> {
        self.heuristics.iter().map(|h| Heuristic::parse(h)).collect()
    }
}

/// Flag overrides; flags win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub deterministic: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        if let Some(seed) = overrides.seed {
            config.embedding.seed = seed;
            config.pool.seed = seed;
            config.experiment.seeds = vec![seed];
            config.fewshot.seeds = vec![seed];
        }
        if let Some(out) = &overrides.out {
            config.paths.out_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let mut required: Vec<&PathBuf> = vec![&self.paths.corpus, &self.paths.targets];
        match (&self.paths.scores, &self.paths.scorer_model) {
            (Some(s), None) => required.push(s),
            (None, Some(m)) => {
                required.push(m);
                if let Some(iv) = &self.paths.ingested_vectors {
                    required.push(iv);
                }
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set either paths.scores or paths.scorer_model, not both".to_string(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of paths.scores or paths.scorer_model is required".to_string(),
                ))
            }
        }
        required.extend(self.paths.similarity_tasks.iter());
        for path in required {
            if !path.exists() {
                return Err(Error::Config(format!("missing input: {}", path.display())));
            }
        }
        if self.paths.similarity_tasks.is_empty() {
            return Err(Error::Config("at least one similarity task is required".to_string()));
        }
        self.experiment.heuristics()?;
        self.fewshot.heuristics()?;
        self.prepare.policy().validate()?;
        self.embedding.sg_config()?.validate()?;
        self.fewshot.nonce_config().validate()?;
        Ok(())
    }

    /// Task name → path, with the file stem as the task name.
    pub fn task_names(&self) -> BTreeMap<String, PathBuf> {
        self.paths
            .similarity_tasks
            .iter()
            .map(|p| {
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                (stem, p.clone())
            })
            .collect()
    }
}
