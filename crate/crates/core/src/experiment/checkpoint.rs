use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{RunOutput, ScoreUnit};
use super::ExperimentConfig;
use crate::detection::{KdeModel, Threshold};
use crate::ingest::{NormalizationStats, WindowConfig};
use crate::model::{ModelConfig, ModelParams};
use crate::sgwt::KernelConfig;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "gwspectra-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Row-major tensor data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionState {
    pub unit: ScoreUnit,
    pub threshold: Threshold,
    pub kde: KdeModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_completed: usize,
    pub final_lr: f64,
    pub steps: u64,
    pub config_hash: String,
}

/// Everything needed to score new data: parameters, preprocessing and the
/// fitted threshold. The full experiment config is embedded so the data
/// split can be re-derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub kernel: KernelConfig,
    pub window: WindowConfig,
    pub normalization: NormalizationStats,
    pub detection: DetectionState,
    pub training: TrainingMeta,
    pub experiment: ExperimentConfig,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_run(cfg: &ExperimentConfig, stats: NormalizationStats, run: &RunOutput) -> Result<Self> {
        if let Some(name) = run.params.first_non_finite() {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: cfg.model,
            kernel: cfg.kernel,
            window: cfg.window,
            normalization: stats,
            detection: DetectionState {
                unit: run.evaluation.unit,
                threshold: run.evaluation.threshold,
                kde: run.evaluation.kde.clone(),
            },
            training: TrainingMeta {
                seed: run.seed,
                epochs_completed: run.epochs_completed,
                final_lr: run.final_lr,
                steps: run.steps,
                config_hash: cfg.hash(),
            },
            experiment: cfg.clone(),
            tensors: run
                .params
                .tensors()
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        })
    }

    /// Rebuild parameters, checking names and shapes against the model
    /// config.
    pub fn params(&self) -> Result<ModelParams> {
        let mut params = ModelParams::init(&self.model, &self.kernel, 0)?.zeros_like();
        let slots = params.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::Data(format!(
                "checkpoint holds {} tensors, model needs {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for (slot, rec) in slots.into_iter().zip(&self.tensors) {
            if slot.name != rec.name {
                return Err(Error::Data(format!("checkpoint tensor `{}` where `{}` was expected", rec.name, slot.name)));
            }
            let numel: usize = rec.shape.iter().product();
            if numel != rec.data.len() || numel != slot.data.len() {
                return Err(Error::shape(format!("checkpoint tensor {}", rec.name), slot.data.len(), rec.data.len()));
            }
            slot.data.copy_from_slice(&rec.data);
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("checkpoint: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Data(format!("checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("not a checkpoint (format `{}`)", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text).map_err(|e| Error::file(path, e))
    }
}
