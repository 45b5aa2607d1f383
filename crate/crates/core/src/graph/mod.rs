//! Path graphs over consecutive signal windows and their Laplacian spectra.

mod eigen;

pub use eigen::{eigendecompose, EigenSystem};

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::ingest::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathGraph {
    /// Node features, one window per row (N x d).
    pub features: Array2<f64>,
    /// Symmetric adjacency, nonzero only between temporal neighbours.
    pub adjacency: Array2<f64>,
    /// Gaussian-kernel bandwidth: mean distance between neighbouring windows.
    pub bandwidth: f64,
    /// Set when every neighbouring pair is identical (bandwidth 0).
    pub degenerate: bool,
    pub label: Label,
    pub source_id: String,
}

impl PathGraph {
    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Write `<stem>_adjacency.csv` and `<stem>_features.csv` under `dir`.
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<()> {
        write_matrix(&dir.join(format!("{stem}_adjacency.csv")), &self.adjacency)?;
        write_matrix(&dir.join(format!("{stem}_features.csv")), &self.features)
    }
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::file(path, e))?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Connect consecutive windows with `exp(-||x_i - x_{i+1}|| / (2B))`, where
/// `B` is the mean neighbour distance. When `B == 0` every edge gets weight 1.
pub fn build_path_graph(windows: &[Vec<f64>], label: Label, source_id: impl Into<String>) -> Result<PathGraph> {
    let n = windows.len();
    let source_id = source_id.into();
    if n < 2 {
        return Err(Error::Data(format!("path graph `{source_id}` needs at least 2 nodes, got {n}")));
    }
    let d = windows[0].len();
    if d == 0 || windows.iter().any(|w| w.len() != d) {
        return Err(Error::shape(
            format!("windows of `{source_id}`"),
            format!("{n} windows of equal non-zero length"),
            format!("lengths {:?}", windows.iter().map(Vec::len).collect::<Vec<_>>()),
        ));
    }
    let features = Array2::from_shape_fn((n, d), |(i, k)| windows[i][k]);
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("features of `{source_id}`")));
    }

    let distances: Vec<f64> = (0..n - 1)
        .map(|i| euclidean(features.row(i), features.row(i + 1)))
        .collect();
    let bandwidth = distances.iter().sum::<f64>() / (n - 1) as f64;
    let degenerate = bandwidth == 0.0;

    let mut adjacency = Array2::zeros((n, n));
    for (i, &dist) in distances.iter().enumerate() {
        let w = if degenerate { 1.0 } else { (-dist / (2.0 * bandwidth)).exp() };
        adjacency[(i, i + 1)] = w;
        adjacency[(i + 1, i)] = w;
    }
    Ok(PathGraph {
        features,
        adjacency,
        bandwidth,
        degenerate,
        label,
        source_id,
    })
}

/// Combinatorial Laplacian `D - A`.
pub fn laplacian(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let mut l = -adjacency.clone();
    for i in 0..n {
        l[(i, i)] += adjacency.row(i).sum();
    }
    l
}
