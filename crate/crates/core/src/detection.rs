//! Node-level anomaly scores, kernel density model of validation scores,
//! and the significance-level threshold.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::model::{forward_batch, GraphInput, ModelParams};
use crate::parallel::Exec;
use crate::rng::{stream, STREAM_EPSILON};
use crate::training::EVAL_CHUNK;
use crate::{Error, Result};

/// Bisection stops once `|CF(xi) - (1 - delta)|` is at most this.
pub const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub graph_id: usize,
    pub node_index: usize,
    /// Squared norm of the node's reconstruction residual.
    pub xi: f64,
    pub abnormal: bool,
}

/// How GWVAE latents are chosen while scoring. GWAE ignores this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    /// epsilon = 0.
    #[default]
    MeanLatent,
    /// Average the reconstruction over `draws` seeded noise draws. Noise
    /// for graph `g` of the scored list and draw `k` comes from its own
    /// stream, so scores are reproducible.
    Sampled { seed: u64, draws: usize },
}

impl ScoringMode {
    /// `draws = 0` selects the mean latent.
    pub fn from_draws(seed: u64, draws: usize) -> Self {
        if draws == 0 {
            ScoringMode::MeanLatent
        } else {
            ScoringMode::Sampled { seed, draws }
        }
    }
}

fn score_epsilon(seed: u64, draw: usize, graphs: std::ops::Range<usize>, nodes: usize, latent: usize) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut eps = Array2::zeros((graphs.len() * nodes, latent));
    for (row_block, g) in graphs.enumerate() {
        let mut rng = stream(seed, &format!("{STREAM_EPSILON}/score/{draw}/{g}"));
        for v in eps.slice_mut(s![row_block * nodes..(row_block + 1) * nodes, ..]).iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    eps
}

/// One score per node, graphs in input order. `labels[g]` marks graph `g`
/// as abnormal.
pub fn anomaly_scores(
    params: &ModelParams,
    graphs: &[GraphInput<'_>],
    labels: &[bool],
    mode: ScoringMode,
    exec: Exec,
) -> Result<Vec<AnomalyScore>> {
    if labels.len() != graphs.len() {
        return Err(Error::shape("score labels", graphs.len(), labels.len()));
    }
    let chunks: Vec<&[GraphInput<'_>]> = graphs.chunks(EVAL_CHUNK).collect();
    let latent = params.latent_dim();
    let residuals = exec.map_range(chunks.len(), |c| -> Result<Vec<Vec<f64>>> {
        let chunk = chunks[c];
        let first = c * EVAL_CHUNK;
        let (x, x_hat, n) = match (mode, params) {
            (ScoringMode::Sampled { seed, draws }, ModelParams::Gwvae(_)) if draws > 0 => {
                let nodes = chunk[0].features.nrows();
                if chunk.iter().any(|g| g.features.nrows() != nodes) {
                    return Err(Error::Data("graphs in one scoring batch differ in node count".into()));
                }
                let mut sum: Option<Array2<f64>> = None;
                let mut input = None;
                for k in 0..draws {
                    let eps = score_epsilon(seed, k, first..first + chunk.len(), nodes, latent);
                    let trace = forward_batch(params, chunk, Some(&eps), Exec::Sequential)?;
                    match sum.as_mut() {
                        Some(acc) => *acc += trace.reconstruction(),
                        None => sum = Some(trace.reconstruction().clone()),
                    }
                    input.get_or_insert(trace.input);
                }
                let x_hat = sum.expect("draws > 0") / draws as f64;
                (input.expect("draws > 0"), x_hat, nodes)
            }
            _ => {
                let trace = forward_batch(params, chunk, None, Exec::Sequential)?;
                let x_hat = trace.reconstruction().clone();
                (trace.input, x_hat, trace.nodes)
            }
        };
        let diff = x_hat - &x;
        Ok((0..chunk.len())
            .map(|g| {
                diff.slice(s![g * n..(g + 1) * n, ..])
                    .rows()
                    .into_iter()
                    .map(|r| r.dot(&r))
                    .collect()
            })
            .collect())
    });
    let mut out = Vec::new();
    let mut graph_id = 0;
    for chunk in residuals {
        for nodes in chunk? {
            for (node_index, xi) in nodes.into_iter().enumerate() {
                if !xi.is_finite() {
                    return Err(Error::NonFinite(format!("anomaly score of graph {graph_id}")));
                }
                out.push(AnomalyScore {
                    graph_id,
                    node_index,
                    xi,
                    abnormal: labels[graph_id],
                });
            }
            graph_id += 1;
        }
    }
    Ok(out)
}

/// Gaussian kernel density over scalar scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub centers: Vec<f64>,
    pub bandwidth: f64,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `(M (d + 2) / 4)^(-2 / (d + 4))` with `d = 1`.
pub fn kde_bandwidth(m: usize) -> f64 {
    (3.0 * m as f64 / 4.0).powf(-2.0 / 5.0)
}

pub fn fit_kde(scores: &[f64]) -> Result<KdeModel> {
    if scores.len() < 2 {
        return Err(Error::Data(format!("KDE needs at least 2 scores, got {}", scores.len())));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KDE scores".into()));
    }
    Ok(KdeModel {
        centers: scores.to_vec(),
        bandwidth: kde_bandwidth(scores.len()),
    })
}

impl KdeModel {
    pub fn density(&self, xi: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .centers
            .iter()
            .map(|c| {
                let z = (xi - c) / h;
                INV_SQRT_2PI * (-0.5 * z * z).exp()
            })
            .sum();
        sum / (self.centers.len() as f64 * h)
    }

    /// Closed-form integral of the density up to `xi`.
    pub fn cdf(&self, xi: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .centers
            .iter()
            .map(|c| 0.5 * erfc(-(xi - c) / (h * std::f64::consts::SQRT_2)))
            .sum();
        (sum / self.centers.len() as f64).clamp(0.0, 1.0)
    }

    /// Interval holding essentially all of the mass.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.centers.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 10.0 * self.bandwidth, hi + 10.0 * self.bandwidth)
    }
}

pub fn kde_cdf(model: &KdeModel, xi: f64) -> f64 {
    model.cdf(xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub xi_delta: f64,
    pub delta: f64,
}

/// Solve `CF(xi) = 1 - delta` by bisection.
pub fn solve_threshold(model: &KdeModel, delta: f64) -> Result<Threshold> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("significance level must lie in (0, 1), got {delta}")));
    }
    let target = 1.0 - delta;
    let (mut lo, mut hi) = model.support();
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let cf = model.cdf(mid);
        if (cf - target).abs() <= THRESHOLD_TOL {
            return Ok(Threshold { xi_delta: mid, delta });
        }
        if cf < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let residual = (model.cdf(mid) - target).abs();
    if residual <= THRESHOLD_TOL {
        Ok(Threshold { xi_delta: mid, delta })
    } else {
        Err(Error::NoConvergence { sweeps: 400, residual })
    }
}

/// `true` (abnormal) iff `xi >= threshold`.
pub fn classify(scores: &[f64], threshold: &Threshold) -> Vec<bool> {
    scores.iter().map(|&xi| xi >= threshold.xi_delta).collect()
}
