//! Run configuration, read from TOML and overridable from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use selfintro::atlas::GridConfig;
use selfintro::classifier::Architecture;
use selfintro::datasets::SplitSpec;
use selfintro::engine::{AdamConfig, TrainConfig};
use selfintro::experiments::{DEFAULT_CONSTELLATION_DRAWS, DEFAULT_CONSTELLATION_SAMPLE};
use selfintro::introspector::{DEFAULT_ESTIMATOR_BATCH, DEFAULT_MMD_WEIGHT, DEFAULT_TARGET_FLOOR};

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four MNIST IDX files under their usual names.
    pub dir: PathBuf,
    /// Stratified draw from the training file.
    pub train_count: usize,
    pub val_count: usize,
    /// First `test_limit` samples of the test file; all of it when absent.
    #[serde(default)]
    pub test_limit: Option<usize>,
}

/// Optimization schedule of one stage; the seed comes from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub cycle_length: usize,
    pub num_cycles: usize,
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub dropout_keep: f64,
}

impl StageConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            cycle_length: self.cycle_length,
            num_cycles: self.num_cycles,
            lr_min: self.lr_min,
            lr_max: self.lr_max,
            batch_size: self.batch_size,
            patience: self.patience,
            dropout_keep: self.dropout_keep,
            adam: AdamConfig::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSection {
    #[serde(flatten)]
    pub stage: StageConfig,
    #[serde(default = "default_mmd_weight")]
    pub mmd_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSection {
    #[serde(flatten)]
    pub stage: StageConfig,
    #[serde(default = "default_target_floor")]
    pub target_floor: f64,
}

fn default_mmd_weight() -> f64 {
    DEFAULT_MMD_WEIGHT
}

fn default_target_floor() -> f64 {
    DEFAULT_TARGET_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub constellation_sample: usize,
    pub constellation_draws: usize,
    pub constellation_sigmas: Vec<f64>,
    pub attack_eps: f64,
    pub attack_steps: usize,
    /// Test samples attacked, each toward every other class.
    pub attack_samples: usize,
    pub attack_continue: bool,
    /// Test-time noise levels at which `train` reports accuracy.
    pub robustness_sigmas: Vec<f64>,
    /// Size of the prior sample used for the MMD report.
    pub prior_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            constellation_sample: DEFAULT_CONSTELLATION_SAMPLE,
            constellation_draws: DEFAULT_CONSTELLATION_DRAWS,
            constellation_sigmas: vec![0.0, 0.1, 0.2, 0.3],
            attack_eps: 0.01,
            attack_steps: 100,
            attack_samples: 20,
            attack_continue: false,
            robustness_sigmas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            prior_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub architecture: Architecture,
    pub data: DataConfig,
    pub classifier: StageConfig,
    pub autoencoder: AutoencoderSection,
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub atlas: GridConfig,
    #[serde(default)]
    pub experiments: ExperimentConfig,
}

/// Per-stage seed offsets, so stages draw from unrelated streams.
pub mod seed_offset {
    pub const SPLIT: u64 = 0;
    pub const CLASSIFIER: u64 = 1;
    pub const AUTOENCODER: u64 = 2;
    pub const ESTIMATOR: u64 = 3;
    pub const CONSTELLATION: u64 = 4;
    pub const ATTACK: u64 = 5;
    pub const ROBUSTNESS: u64 = 6;
    pub const PRIOR: u64 = 7;
}

impl RunConfig {
    /// The laptop-sized setup: 6x128 classifier, ten 1000-step cycles.
    pub fn desk(data_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let stage = StageConfig {
            cycle_length: 1000,
            num_cycles: 10,
            lr_min: 0.0,
            lr_max: 1e-3,
            batch_size: 128,
            patience: 5,
            dropout_keep: 0.9,
        };
        RunConfig {
            seed: 1,
            output_dir: output_dir.into(),
            architecture: Architecture::Desk,
            data: DataConfig {
                dir: data_dir.into(),
                train_count: 55_000,
                val_count: 5_000,
                test_limit: None,
            },
            classifier: stage.clone(),
            autoencoder: AutoencoderSection {
                stage: StageConfig {
                    dropout_keep: 1.0,
                    ..stage.clone()
                },
                mmd_weight: DEFAULT_MMD_WEIGHT,
            },
            estimator: EstimatorSection {
                stage: StageConfig {
                    dropout_keep: 1.0,
                    batch_size: DEFAULT_ESTIMATOR_BATCH,
                    ..stage
                },
                target_floor: DEFAULT_TARGET_FLOOR,
            },
            atlas: GridConfig::default(),
            experiments: ExperimentConfig::default(),
        }
    }

    /// The 12x200 setup with thirty 3000-step cycles; the estimator gets fifty
    /// 10000-step cycles.
    pub fn paper(data_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let mut c = Self::desk(data_dir, output_dir);
        c.architecture = Architecture::Paper;
        for s in [
            &mut c.classifier,
            &mut c.autoencoder.stage,
            &mut c.estimator.stage,
        ] {
            s.cycle_length = 3000;
            s.num_cycles = 30;
            s.lr_max = 1e-5;
        }
        c.estimator.stage.cycle_length = 10_000;
        c.estimator.stage.num_cycles = 50;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut c = Self::from_toml(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        if c.data.dir.is_relative() {
            c.data.dir = base.join(&c.data.dir);
        }
        if c.output_dir.is_relative() {
            c.output_dir = base.join(&c.output_dir);
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("classifier", &self.classifier),
            ("autoencoder", &self.autoencoder.stage),
            ("estimator", &self.estimator.stage),
        ] {
            s.train_config(self.seed)
                .validate()
                .with_context(|| format!("[{name}] section"))?;
        }
        self.atlas.validate()?;
        for f in [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS] {
            let p = self.data.dir.join(f);
            if !p.is_file() {
                bail!("data file {} does not exist", p.display());
            }
        }
        if self.data.train_count == 0 || self.data.val_count < 2 {
            bail!("need training samples and at least two validation samples");
        }
        if !(self.autoencoder.mmd_weight >= 0.0) {
            bail!("mmd_weight must be non-negative");
        }
        if self.experiments.attack_eps < 0.0 {
            bail!("attack_eps must be non-negative");
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_count: self.data.train_count,
            val_count: self.data.val_count,
            test_count: 0,
            seed: self.seed.wrapping_add(seed_offset::SPLIT),
        }
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }

    /// sha256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().unwrap().remove("output_dir");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
