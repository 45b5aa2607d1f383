//! Raw signal ingestion: normalization, windowing, splitting, synthesis and
//! file loaders.

mod io;
mod split;
mod synthetic;

pub use io::{load_csv, load_wav, write_csv};
pub use split::{split_dataset, DatasetSplit};
pub use synthetic::{generate_synthetic, AnomalyKind, AnomalySpec, BaseWaveform, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Health label of a signal or graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "kind", rename_all = "lowercase")]
pub enum Label {
    Normal,
    Abnormal(String),
}

impl Label {
    pub fn is_abnormal(&self) -> bool {
        matches!(self, Label::Abnormal(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub source_id: String,
    pub label: Label,
}

impl RawSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64, source_id: impl Into<String>, label: Label) -> Result<Self> {
        let source_id = source_id.into();
        if samples.is_empty() {
            return Err(Error::Data(format!("signal `{source_id}` has no samples")));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Data(format!(
                "signal `{source_id}` has invalid sample rate {sample_rate}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Min/max used by the affine normalization. Always computed from training
/// data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min_val: f64,
    pub max_val: f64,
}

impl NormalizationStats {
    pub fn from_samples<'a>(chunks: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut min_val = f64::INFINITY;
        let mut max_val = f64::NEG_INFINITY;
        for chunk in chunks {
            for &x in chunk {
                if !x.is_finite() {
                    return Err(Error::NonFinite("training samples".into()));
                }
                min_val = min_val.min(x);
                max_val = max_val.max(x);
            }
        }
        if min_val > max_val {
            return Err(Error::Data("no training samples to compute normalization stats".into()));
        }
        Ok(Self { min_val, max_val })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min_val) / (self.max_val - self.min_val)
    }
}

/// Map every sample to `(x - min) / (max - min)`. Values outside the
/// training range are kept as-is (no clipping).
pub fn normalize(signal: &RawSignal, stats: &NormalizationStats) -> Result<RawSignal> {
    if !(stats.max_val > stats.min_val) {
        return Err(Error::DegenerateStats {
            source_id: signal.source_id.clone(),
            value: stats.min_val,
        });
    }
    Ok(RawSignal {
        samples: signal.samples.iter().map(|&x| stats.apply(x)).collect(),
        sample_rate: signal.sample_rate,
        source_id: signal.source_id.clone(),
        label: signal.label.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// Samples per node.
    pub window_len: usize,
    /// Nodes per graph.
    pub graph_size: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 1024,
            graph_size: 10,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 1 {
            return Err(Error::Config("window_len must be >= 1".into()));
        }
        if self.graph_size < 2 {
            return Err(Error::Config("graph_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// Split into `floor(L / d)` consecutive non-overlapping windows of length
/// `d`; the trailing remainder is dropped.
pub fn window(signal: &RawSignal, cfg: &WindowConfig) -> Result<Vec<Vec<f64>>> {
    let d = cfg.window_len;
    if d == 0 {
        return Err(Error::Config("window_len must be >= 1".into()));
    }
    if signal.len() < d {
        return Err(Error::SignalTooShort {
            source_id: signal.source_id.clone(),
            len: signal.len(),
            window: d,
        });
    }
    Ok(signal.samples.chunks_exact(d).map(<[f64]>::to_vec).collect())
}
