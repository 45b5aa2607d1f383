//! Spectral graph wavelet operator: one low-pass scaling block followed by
//! `J` band-pass wavelet blocks, all functions of the graph Laplacian.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::graph::EigenSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// `s_j = 2^j / lambda_max`: band `j` peaks at `lambda_max / 2^j`.
    #[default]
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Decay of the scaling kernel.
    pub q: f64,
    /// Scaling-kernel amplitude; defaults to the peak of the wavelet kernel.
    pub gamma: f64,
    /// Number of band-pass scales.
    pub scales: usize,
    pub scale_rule: ScaleRule,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            q: 1.0,
            gamma: (-1.0f64).exp(),
            scales: 2,
            scale_rule: ScaleRule::Dyadic,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("kernel q must be > 0, got {}", self.q)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("kernel gamma must be > 0, got {}", self.gamma)));
        }
        if self.scales < 1 {
            return Err(Error::Config("at least one band-pass scale is required".into()));
        }
        Ok(())
    }

    /// Rows of the stacked operator for an `n`-node graph.
    pub fn operator_rows(&self, n: usize) -> usize {
        (self.scales + 1) * n
    }
}

/// Low-pass `u(lambda) = gamma * exp(-q * lambda / (0.6 * lambda_max))`.
pub fn scaling_kernel(lambda: f64, lambda_max: f64, cfg: &KernelConfig) -> Result<f64> {
    if !(lambda_max > 0.0) {
        return Err(Error::NullSpectrum(lambda_max));
    }
    Ok(cfg.gamma * (-cfg.q * lambda / (0.6 * lambda_max)).exp())
}

/// Band-pass `v(s * lambda) = s * lambda * exp(-s * lambda)`.
pub fn wavelet_kernel(scale: f64, lambda: f64) -> f64 {
    let x = scale * lambda;
    x * (-x).exp()
}

pub fn select_scales(lambda_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) {
        return Err(Error::NullSpectrum(lambda_max));
    }
    if count < 1 {
        return Err(Error::Config("at least one band-pass scale is required".into()));
    }
    Ok((1..=count).map(|j| 2f64.powi(j as i32) / lambda_max).collect())
}

/// Stacked filter bank `[u(L); v(s_1 L); ...; v(s_J L)]`, shape
/// `((J + 1) N) x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletOperator {
    pub matrix: Array2<f64>,
    pub scales: Vec<f64>,
    pub lambda_max: f64,
    /// Kernel response per block and eigenvalue, `(J + 1) x N`.
    pub responses: Array2<f64>,
}

impl WaveletOperator {
    pub fn num_nodes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_blocks(&self) -> usize {
        self.scales.len() + 1
    }

    pub fn block(&self, b: usize) -> ArrayView2<'_, f64> {
        let n = self.num_nodes();
        self.matrix.slice(s![b * n..(b + 1) * n, ..])
    }

    /// `P^T diag(theta) P`.
    pub fn filter(&self, theta: &[f64]) -> Result<Array2<f64>> {
        let rows = self.matrix.nrows();
        if theta.len() != rows {
            return Err(Error::shape("wavelet filter", format!("theta of length {rows}"), theta.len()));
        }
        let weighted = Array2::from_shape_fn(self.matrix.dim(), |(k, j)| theta[k] * self.matrix[(k, j)]);
        Ok(self.matrix.t().dot(&weighted))
    }
}

/// Each block is `U diag(k_b(lambda)) U^T`.
///
/// A graph with an all-zero spectrum has no meaningful `lambda_max`; its
/// blocks are the kernel limits at zero (`gamma * I` and zeros) and the
/// scales fall back to `lambda_max = 1`.
pub fn build_wavelet_operator(eigs: &EigenSystem, cfg: &KernelConfig) -> Result<WaveletOperator> {
    cfg.validate()?;
    let n = eigs.len();
    if n == 0 {
        return Err(Error::Data("empty eigensystem".into()));
    }
    let lambda_max = eigs.lambda_max();
    let null = !(lambda_max > 0.0);
    let scales = select_scales(if null { 1.0 } else { lambda_max }, cfg.scales)?;

    let blocks = cfg.scales + 1;
    let mut responses = Array2::zeros((blocks, n));
    for (i, &lam) in eigs.values.iter().enumerate() {
        let lam = lam.max(0.0);
        responses[(0, i)] = if null { cfg.gamma } else { scaling_kernel(lam, lambda_max, cfg)? };
        for (j, &sj) in scales.iter().enumerate() {
            responses[(j + 1, i)] = wavelet_kernel(sj, lam);
        }
    }

    let mut matrix = Array2::zeros((blocks * n, n));
    for b in 0..blocks {
        let block = eigs.spectral_function_indexed(|i| responses[(b, i)]);
        matrix.slice_mut(s![b * n..(b + 1) * n, ..]).assign(&block);
    }
    Ok(WaveletOperator {
        matrix,
        scales,
        lambda_max,
        responses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_path_graph, eigendecompose, laplacian};
    use crate::ingest::Label;

    const E1: f64 = 0.36787944117144233;

    #[test]
    fn scaling_kernel_values() {
        let cfg = KernelConfig::default();
        assert!((scaling_kernel(0.0, 4.0, &cfg).unwrap() - E1).abs() < 1e-15);
        let at = scaling_kernel(0.6 * 4.0, 4.0, &cfg).unwrap();
        assert!((at - (-2.0f64).exp()).abs() < 1e-15, "{at}");
        assert!(scaling_kernel(1.0, 4.0, &cfg).unwrap() > scaling_kernel(1.5, 4.0, &cfg).unwrap());
        assert!(matches!(scaling_kernel(0.0, 0.0, &cfg), Err(Error::NullSpectrum(_))));
    }

    #[test]
    fn wavelet_kernel_values() {
        assert_eq!(wavelet_kernel(3.0, 0.0), 0.0);
        assert!((wavelet_kernel(0.5, 2.0) - E1).abs() < 1e-15);
        assert!((wavelet_kernel(1.0, 2.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!(wavelet_kernel(1.0, 60.0) < 1e-20);
    }

    #[test]
    fn dyadic_scales() {
        assert_eq!(select_scales(4.0, 2).unwrap(), vec![0.5, 1.0]);
        assert!(select_scales(0.0, 2).is_err());
        let lmax = 3.7;
        let s = select_scales(lmax, 6).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        for (j, sj) in s.iter().enumerate() {
            let centre = lmax / 2f64.powi(j as i32 + 1);
            assert!((wavelet_kernel(*sj, centre) - E1).abs() < 1e-15);
        }
        assert_eq!(KernelConfig::default().scales, 2);
    }

    #[test]
    fn null_spectrum_operator() {
        let eigs = eigendecompose(&Array2::zeros((3, 3))).unwrap();
        let op = build_wavelet_operator(&eigs, &KernelConfig::default()).unwrap();
        let expect = Array2::<f64>::eye(3) * E1;
        assert!((&op.block(0) - &expect).iter().all(|v| v.abs() < 1e-15));
        assert!(op.block(1).iter().chain(op.block(2).iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn default_shape() {
        let w: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let g = build_path_graph(&w, Label::Normal, "g").unwrap();
        let eigs = eigendecompose(&laplacian(&g.adjacency)).unwrap();
        let op = build_wavelet_operator(&eigs, &KernelConfig::default()).unwrap();
        assert_eq!(op.matrix.dim(), (30, 10));
        let theta = vec![1.0; 30];
        let direct = op.matrix.t().dot(&op.matrix);
        assert!((&op.filter(&theta).unwrap() - &direct).iter().all(|v| v.abs() < 1e-14));
        assert!(op.filter(&theta[..29]).is_err());
    }
}
