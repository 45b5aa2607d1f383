use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators mirroring the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: ModelParams,
    pub second_moment: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut OptimizerState, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let grads = grads.tensors();
    let mut p = params.tensors_mut();
    let mut m = state.first_moment.tensors_mut();
    let mut v = state.second_moment.tensors_mut();
    if grads.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
        return Err(Error::shape("adam tensors", p.len(), grads.len()));
    }
    for (((p, g), m), v) in p.iter_mut().zip(&grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        if p.data.len() != g.data.len() {
            return Err(Error::shape(format!("adam `{}`", p.name), p.data.len(), g.data.len()));
        }
        for (((pi, &gi), mi), vi) in p.data.iter_mut().zip(g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::sgwt::KernelConfig;

    fn params() -> ModelParams {
        let cfg = ModelConfig { input_dim: 4, hidden_dim: 4, latent_dim: 2, graph_size: 3, ..Default::default() };
        ModelParams::init(&cfg, &KernelConfig::default(), 1).unwrap()
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = params();
        let before = p.clone();
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut st, &mut p, &before.zeros_like(), 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        for (i, t) in g.tensors_mut().into_iter().enumerate() {
            for (j, v) in t.data.iter_mut().enumerate() {
                *v = if (i + j) % 2 == 0 { 0.37 } else { -5.0 };
            }
        }
        let lr = 1e-3;
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut st, &mut p, &g, lr).unwrap();
        for (a, b) in p.tensors().iter().zip(before.tensors()) {
            for (x, y) in a.data.iter().zip(b.data) {
                let delta = (x - y).abs();
                assert!(delta > 0.99 * lr && delta <= lr, "{delta}");
            }
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut p = params();
            let mut st = OptimizerState::new(&p, AdamConfig::default());
            for k in 0..5 {
                let mut g = p.clone();
                for t in g.tensors_mut() {
                    t.data.iter_mut().for_each(|v| *v = (*v * (k as f64 + 1.3)).sin());
                }
                adam_step(&mut st, &mut p, &g, 1e-2).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        for (x, y) in a.tensors().iter().zip(b.tensors()) {
            assert!(x.data.iter().zip(y.data).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}
