//! Losses, gradients, Adam, and the epoch loop.

mod adam;
mod backprop;
mod loss;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use backprop::{gradients, trace_losses};
pub use loss::{kl_divergence, loss_gwae, loss_gwvae, reconstruction_error, LossBreakdown};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{forward_batch, GraphInput, ModelParams};
use crate::parallel::Exec;
use crate::rng::{stream, StreamRng, STREAM_BATCHING, STREAM_EPSILON};
use crate::{Error, Result};

/// Graphs per forward call when evaluating (not training).
pub(crate) const EVAL_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Graphs per update step.
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate multiplier applied every `lr_decay_every` epochs.
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    /// L2 coefficient added to the gradient (0 disables).
    pub weight_decay: f64,
    pub kl_weight: f64,
    pub adam: AdamConfig,
    /// Train GWVAE on the mean latent (epsilon = 0).
    pub zero_epsilon: bool,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 8,
            lr: 1e-3,
            lr_decay_factor: 0.1,
            lr_decay_every: 50,
            weight_decay: 0.0,
            kl_weight: 0.5,
            adam: AdamConfig::default(),
            zero_epsilon: false,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::Config(format!("lr_decay_factor must lie in (0, 1], got {}", self.lr_decay_factor)));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::Config("lr_decay_every must be >= 1".into()));
        }
        if !(self.kl_weight >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("kl_weight and weight_decay must be >= 0".into()));
        }
        Ok(())
    }

    /// Learning rate in force during 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = epoch.saturating_sub(1) / self.lr_decay_every;
        self.lr * self.lr_decay_factor.powi(steps as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    /// Mean per-graph reconstruction error on the validation set.
    pub val_recon: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub epochs_completed: usize,
    pub final_lr: f64,
    pub steps: u64,
}

fn draw_epsilon(rng: &mut StreamRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Mean per-graph reconstruction error using the deterministic latent.
pub fn mean_reconstruction_error(params: &ModelParams, graphs: &[GraphInput<'_>], exec: Exec) -> Result<f64> {
    if graphs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in graphs.chunks(EVAL_CHUNK) {
        let trace = forward_batch(params, chunk, None, exec)?;
        total += trace_losses(&trace, 0.0).iter().map(|l| l.l_rc).sum::<f64>();
    }
    Ok(total / graphs.len() as f64)
}

/// Run `epochs` of minibatch Adam starting from `params`.
///
/// Batches come from a seeded reshuffle each epoch; GWVAE noise comes from
/// its own stream. `val` is only read, for monitoring.
pub fn train(
    mut params: ModelParams,
    train_set: &[GraphInput<'_>],
    val: &[GraphInput<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut batch_rng = stream(cfg.seed, STREAM_BATCHING);
    let mut eps_rng = stream(cfg.seed, STREAM_EPSILON);
    let mut opt = OptimizerState::new(&params, cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let latent = params.latent_dim();
    let variational = matches!(params, ModelParams::Gwvae(_));

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut batch_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<GraphInput<'_>> = idx.iter().map(|&i| train_set[i]).collect();
            let rows: usize = batch.iter().map(|g| g.features.nrows()).sum();
            let eps = (variational && !cfg.zero_epsilon).then(|| draw_epsilon(&mut eps_rng, rows, latent));
            let (loss, mut grads) = match gradients(&params, &batch, eps.as_ref(), cfg.kl_weight, cfg.exec) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if cfg.weight_decay > 0.0 {
                for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
                    g.data.iter_mut().zip(p.data).for_each(|(g, p)| *g += cfg.weight_decay * p);
                }
            }
            adam_step(&mut opt, &mut params, &grads, lr)?;
            loss_sum += loss.total;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: train_loss });
        }
        let val_recon = mean_reconstruction_error(&params, val, cfg.exec)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_recon,
            lr,
        });
    }
    let final_lr = if cfg.epochs == 0 { cfg.lr } else { cfg.lr_at(cfg.epochs) };
    Ok(TrainOutcome {
        params,
        history,
        epochs_completed: cfg.epochs,
        final_lr,
        steps: opt.step,
    })
}
