use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataSource, ExperimentConfig};
use crate::graph::{build_path_graph, eigendecompose, laplacian, EigenSystem, PathGraph};
use crate::ingest::{
    generate_synthetic, load_csv, load_wav, split_dataset, window, write_csv, Label, NormalizationStats, RawSignal,
    SyntheticSpec, WindowConfig,
};
use crate::model::GraphInput;
use crate::parallel::Exec;
use crate::sgwt::{build_wavelet_operator, KernelConfig, WaveletOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub source_id: String,
    pub label: Label,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: f64,
    pub normal_count: usize,
    pub abnormal_count: usize,
    /// Present when the files were generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<(u64, SyntheticSpec)>,
    pub signals: Vec<ManifestEntry>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Write each signal as `<source_id>.csv` plus `manifest.json` into `dir`.
/// Returns the manifest path.
pub fn write_manifest(dir: &Path, signals: &[RawSignal], synthetic: Option<(u64, SyntheticSpec)>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let first = signals.first().ok_or_else(|| Error::Data("no signals to write".into()))?;
    let mut entries = Vec::with_capacity(signals.len());
    for s in signals {
        let name = format!("{}.csv", s.source_id);
        let path = dir.join(&name);
        write_csv(&path, s)?;
        entries.push(ManifestEntry {
            path: name,
            source_id: s.source_id.clone(),
            label: s.label.clone(),
            sha256: sha256_file(&path)?,
        });
    }
    let abnormal_count = signals.iter().filter(|s| s.label.is_abnormal()).count();
    let manifest = Manifest {
        sample_rate: first.sample_rate,
        normal_count: signals.len() - abnormal_count,
        abnormal_count,
        synthetic,
        signals: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::file(&path, e))?;
    Ok(path)
}

pub fn load_manifest(path: &Path, channel: Option<usize>) -> Result<Vec<RawSignal>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .signals
        .iter()
        .map(|entry| {
            let file = base.join(&entry.path);
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            let mut signal = match ext.as_str() {
                "csv" | "txt" => load_csv(&file, manifest.sample_rate)?,
                "wav" => load_wav(&file, channel)?,
                _ => return Err(Error::file(&file, "expected a .csv or .wav file")),
            };
            signal.source_id = entry.source_id.clone();
            signal.label = entry.label.clone();
            Ok(signal)
        })
        .collect()
}

pub fn load_signals(source: &DataSource) -> Result<Vec<RawSignal>> {
    match source {
        DataSource::Synthetic { data_seed, spec } => generate_synthetic(spec, *data_seed),
        DataSource::Manifest { path, channel } => load_manifest(path, *channel),
    }
}

/// Unnormalized windows of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGraph {
    pub windows: Vec<Vec<f64>>,
    pub label: Label,
    pub source_id: String,
}

/// Cut every signal into windows and group consecutive windows into
/// graphs of `graph_size` nodes; leftover windows are dropped. Returns
/// `(normal, abnormal)`.
pub fn group_windows(signals: &[RawSignal], cfg: &WindowConfig) -> Result<(Vec<RawGraph>, Vec<RawGraph>)> {
    cfg.validate()?;
    let mut normal = Vec::new();
    let mut abnormal = Vec::new();
    for s in signals {
        let windows = window(s, cfg)?;
        if windows.len() < cfg.graph_size {
            return Err(Error::Data(format!(
                "{}: {} windows, need at least {} for one graph",
                s.source_id,
                windows.len(),
                cfg.graph_size
            )));
        }
        for (k, chunk) in windows.chunks_exact(cfg.graph_size).enumerate() {
            let g = RawGraph {
                windows: chunk.to_vec(),
                label: s.label.clone(),
                source_id: format!("{}#{k}", s.source_id),
            };
            if s.label.is_abnormal() {
                abnormal.push(g);
            } else {
                normal.push(g);
            }
        }
    }
    Ok((normal, abnormal))
}

/// A normalized graph with its spectral operator.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub graph: PathGraph,
    pub eigen: EigenSystem,
    pub operator: WaveletOperator,
}

impl GraphSample {
    pub fn input(&self) -> GraphInput<'_> {
        GraphInput {
            features: self.graph.features.view(),
            operator: &self.operator,
        }
    }

    pub fn is_abnormal(&self) -> bool {
        self.graph.label.is_abnormal()
    }
}

pub fn build_samples(
    graphs: &[RawGraph],
    stats: &NormalizationStats,
    kernel: &KernelConfig,
    exec: Exec,
) -> Result<Vec<GraphSample>> {
    exec.map(graphs, |g| {
        let windows: Vec<Vec<f64>> = g.windows.iter().map(|w| w.iter().map(|&x| stats.apply(x)).collect()).collect();
        let graph = build_path_graph(&windows, g.label.clone(), g.source_id.clone())?;
        let eigen = eigendecompose(&laplacian(&graph.adjacency))?;
        let operator = build_wavelet_operator(&eigen, kernel)?;
        Ok(GraphSample { graph, eigen, operator })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<GraphSample>,
    pub val: Vec<GraphSample>,
    pub test: Vec<GraphSample>,
    pub stats: NormalizationStats,
    pub seed: u64,
}

impl PreparedData {
    /// Rebuild every wavelet operator for a different kernel, reusing the
    /// eigensystems.
    pub fn rebuild_operators(&mut self, kernel: &KernelConfig, exec: Exec) -> Result<()> {
        for part in [&mut self.train, &mut self.val, &mut self.test] {
            let ops: Vec<Result<WaveletOperator>> = exec.map(part, |s| build_wavelet_operator(&s.eigen, kernel));
            for (s, op) in part.iter_mut().zip(ops) {
                s.operator = op?;
            }
        }
        Ok(())
    }

    pub fn inputs(part: &[GraphSample]) -> Vec<GraphInput<'_>> {
        part.iter().map(GraphSample::input).collect()
    }
}

/// Window, split by `seed`, normalize with training-set statistics and
/// build graphs and operators.
pub fn prepare(cfg: &ExperimentConfig, signals: &[RawSignal], seed: u64, exec: Exec) -> Result<PreparedData> {
    let (normal, abnormal) = group_windows(signals, &cfg.window)?;
    let split = split_dataset(normal, abnormal, cfg.split.train_frac, cfg.split.val_frac, seed)?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Data("training and validation sets need at least one graph each".into()));
    }
    let stats = NormalizationStats::from_samples(split.train.iter().flat_map(|g| g.windows.iter().map(Vec::as_slice)))
        .map_err(|e| match e {
            Error::DegenerateStats { value, .. } => Error::DegenerateStats {
                source_id: "training set".into(),
                value,
            },
            other => other,
        })?;
    Ok(PreparedData {
        train: build_samples(&split.train, &stats, &cfg.kernel, exec)?,
        val: build_samples(&split.val, &stats, &cfg.kernel, exec)?,
        test: build_samples(&split.test, &stats, &cfg.kernel, exec)?,
        stats,
        seed,
    })
}
