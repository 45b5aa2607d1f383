//! End-to-end pipeline: configuration, data preparation, training runs,
//! evaluation across seeds, scale sweeps and persisted artifacts.

mod checkpoint;
mod data;
pub mod export;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{SyntheticSpec, WindowConfig};
use crate::model::ModelConfig;
use crate::sgwt::KernelConfig;
use crate::training::TrainConfig;
use crate::{Error, Result};

pub use checkpoint::{Checkpoint, DetectionState, TensorRecord, TrainingMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use data::{
    build_samples, group_windows, load_manifest, load_signals, prepare, write_manifest, GraphSample, Manifest, ManifestEntry,
    PreparedData, RawGraph,
};
pub use run::{
    evaluate, graph_level_scores, run_eval, run_single, sweep_scales, Evaluation, RunOutput, ScoreUnit, SweepRow,
};

/// Where signals come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated in memory from a fixed data seed.
    Synthetic {
        #[serde(default)]
        data_seed: u64,
        #[serde(default)]
        spec: SyntheticSpec,
    },
    /// A JSON manifest listing CSV/WAV files with labels. Relative paths
    /// resolve against the manifest's directory.
    Manifest {
        path: PathBuf,
        /// Channel to read from multi-channel WAV files.
        #[serde(default)]
        channel: Option<usize>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            data_seed: 0,
            spec: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.4,
            val_frac: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Significance level of the KDE threshold.
    pub delta: f64,
    /// Average node scores per graph before thresholding and metrics.
    pub graph_level: bool,
    /// GWVAE only: noise draws averaged per reconstruction when scoring,
    /// seeded by the run seed. 0 scores with the mean latent.
    pub latent_draws: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            graph_level: false,
            latent_draws: 8,
        }
    }
}

/// Every setting of an experiment. An empty TOML file gives the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub window: WindowConfig,
    pub kernel: KernelConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub detect: DetectConfig,
    /// One training run per seed. `train.seed` is overwritten per run.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            window: WindowConfig::default(),
            kernel: KernelConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            detect: DetectConfig::default(),
            seeds: (0..5).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DataSource::Manifest { path: manifest, .. } = &mut cfg.data {
            if manifest.is_relative() {
                *manifest = path.parent().unwrap_or(Path::new(".")).join(&*manifest);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Checks every section and the dimension chain
    /// window length = model input, graph size = model graph size.
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.kernel.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let chain = |what: &str, a: usize, b: usize| {
            if a == b {
                Ok(())
            } else {
                Err(Error::Config(format!("{what}: {a} != {b}")))
            }
        };
        chain("window.window_len vs model.input_dim", self.window.window_len, self.model.input_dim)?;
        chain("window.graph_size vs model.graph_size", self.window.graph_size, self.model.graph_size)?;
        if let DataSource::Synthetic { spec, .. } = &self.data {
            spec.validate()?;
            chain("data.spec.window_len vs window.window_len", spec.window_len, self.window.window_len)?;
            chain("data.spec.graph_size vs window.graph_size", spec.graph_size, self.window.graph_size)?;
        }
        let SplitConfig { train_frac, val_frac } = self.split;
        if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac <= 1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "split fractions must be positive with train + val <= 1 (got {train_frac} + {val_frac})"
            )));
        }
        if !(self.detect.delta > 0.0 && self.detect.delta < 1.0) {
            return Err(Error::Config(format!("detect.delta must lie in (0, 1), got {}", self.detect.delta)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.train.epochs, 100);
        assert_eq!(cfg.detect.delta, 0.1);
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let mut cfg = ExperimentConfig::default();
        cfg.kernel.scales = 5;
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn overrides_and_manifest_source() {
        let cfg = ExperimentConfig::from_toml(
            "seeds = [3]\n[data]\nsource = \"manifest\"\npath = \"data/manifest.json\"\n[model]\nkind = \"gwvae\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert!(matches!(cfg.data, DataSource::Manifest { channel: None, .. }));
        assert_eq!(cfg.model.kind, crate::model::ModelKind::Gwvae);
    }

    #[test]
    fn rejects_broken_chains_and_fields() {
        let bad = [
            "[model]\ninput_dim = 512\n",
            "[window]\ngraph_size = 5\n",
            "[split]\ntrain_frac = 0.7\nval_frac = 0.4\n",
            "[detect]\ndelta = 1.0\n",
            "seeds = []\n",
            "unknown = 1\n",
            "[kernel]\nscales = 0\n",
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(err.category(), crate::ErrorCategory::Config, "{text}");
        }
    }
}
