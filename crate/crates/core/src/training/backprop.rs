//! Reverse-mode gradients for the fixed GWAE/GWVAE computation graph.
//!
//! Each layer type has a hand-written adjoint that consumes the cached
//! forward intermediates in [`ForwardTrace`]. The batch loss is the mean of
//! the per-graph losses.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::loss::LossBreakdown;
use crate::model::{
    forward_batch, Affine, AffineTrace, Decoder, ForwardTrace, GraphInput, GwaeParams, GwvaeParams, LatentTrace, LayerTrace,
    ModelParams, SgwConvLayer, LOGSIGMA_CLAMP,
};
use crate::parallel::{matmul, Exec};
use crate::sgwt::WaveletOperator;
use crate::{Error, Result};

fn layer_backward(
    layer: &SgwConvLayer,
    trace: &LayerTrace,
    operators: &[&WaveletOperator],
    nodes: usize,
    d_out: &Array2<f64>,
    need_input: bool,
    exec: Exec,
) -> (SgwConvLayer, Option<Array2<f64>>) {
    let act = trace.activation;
    let d_pre = ndarray::Zip::from(d_out)
        .and(&trace.pre)
        .map_collect(|&g, &p| g * act.derivative(p));
    let bias = layer.bias.as_ref().map(|_| d_pre.sum_axis(Axis(0)));
    let weight = matmul(exec, trace.mixed.t(), d_pre.view());
    let d_mixed = matmul(exec, d_pre.view(), layer.weight.t());

    // theta_k enters as P^T diag(theta) P, so dL/dtheta_k = p_k^T dM p_k with dM = dMixed X^T.
    let per_graph: Vec<(Array1<f64>, Option<Array2<f64>>)> = exec.map_range(operators.len(), |g| {
        let rows = s![g * nodes..(g + 1) * nodes, ..];
        let dm = d_mixed.slice(rows);
        let d_filter = dm.dot(&trace.input.slice(rows).t());
        let p = &operators[g].matrix;
        let t = p.dot(&d_filter);
        let d_theta = (&t * p).sum_axis(Axis(1));
        let d_in = need_input.then(|| trace.filters[g].dot(&dm));
        (d_theta, d_in)
    });
    let mut theta = Array1::zeros(layer.theta.len());
    for (d_theta, _) in &per_graph {
        theta += d_theta;
    }
    let d_input = need_input.then(|| {
        let views: Vec<_> = per_graph.iter().map(|(_, d)| d.as_ref().expect("requested").view()).collect();
        concatenate(Axis(0), &views).expect("uniform widths")
    });
    (SgwConvLayer { theta, weight, bias }, d_input)
}

fn affine_backward(a: &Affine, trace: &AffineTrace, d_pre: &Array2<f64>, exec: Exec) -> (Affine, Array2<f64>) {
    let grad = Affine {
        weight: matmul(exec, trace.input.t(), d_pre.view()),
        bias: d_pre.sum_axis(Axis(0)),
    };
    let d_input = matmul(exec, d_pre.view(), a.weight.t());
    (grad, d_input)
}

/// Returns decoder gradients and the gradient with respect to the latent.
fn decoder_backward(
    decoder: &Decoder,
    fc1: &AffineTrace,
    fc2: &AffineTrace,
    d_out: &Array2<f64>,
    exec: Exec,
) -> (Decoder, Array2<f64>) {
    let (g_fc2, d_hidden) = affine_backward(&decoder.fc2, fc2, d_out, exec);
    let d_fc1_pre = ndarray::Zip::from(&d_hidden)
        .and(&fc1.pre)
        .map_collect(|&g, &p| if p > 0.0 { g } else { 0.0 });
    let (g_fc1, d_z) = affine_backward(&decoder.fc1, fc1, &d_fc1_pre, exec);
    (Decoder { fc1: g_fc1, fc2: g_fc2 }, d_z)
}

/// Per-graph losses of a forward trace.
pub fn trace_losses(trace: &ForwardTrace, kl_weight: f64) -> Vec<LossBreakdown> {
    let n = trace.nodes;
    let x = &trace.input;
    let x_hat = trace.reconstruction();
    (0..trace.num_graphs())
        .map(|g| {
            let rows = s![g * n..(g + 1) * n, ..];
            let l_rc: f64 = ndarray::Zip::from(x.slice(rows))
                .and(x_hat.slice(rows))
                .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
            let l_kl = match &trace.latent {
                LatentTrace::Deterministic { .. } => 0.0,
                LatentTrace::Variational { mu, logsigma_clamped, .. } => {
                    let raw: f64 = ndarray::Zip::from(mu.output.slice(rows))
                        .and(logsigma_clamped.slice(rows))
                        .fold(0.0, |acc, &m, &ls| acc + 0.5 * (m * m + (2.0 * ls).exp() - 2.0 * ls - 1.0));
                    kl_weight * raw
                }
            };
            LossBreakdown { l_rc, l_kl, total: l_rc + l_kl }
        })
        .collect()
}

/// Batch-mean loss and its exact gradient with respect to every parameter.
///
/// For GWVAE the latent noise `epsilon` (stacked, one row per node) is held
/// fixed, giving the pathwise estimator; `None` uses the mean latent.
pub fn gradients(
    params: &ModelParams,
    graphs: &[GraphInput<'_>],
    epsilon: Option<&Array2<f64>>,
    kl_weight: f64,
    exec: Exec,
) -> Result<(LossBreakdown, ModelParams)> {
    let trace = forward_batch(params, graphs, epsilon, exec)?;
    let batch = graphs.len() as f64;
    let losses = trace_losses(&trace, kl_weight);
    let loss = losses
        .iter()
        .fold(LossBreakdown::default(), |acc, l| acc.add(*l))
        .scaled(1.0 / batch);

    let operators: Vec<&WaveletOperator> = graphs.iter().map(|g| g.operator).collect();
    let nodes = trace.nodes;
    let d_xhat = (trace.reconstruction() - &trace.input) * (2.0 / batch);
    let (decoder, d_z) = decoder_backward(params.decoder(), &trace.fc1, &trace.fc2, &d_xhat, exec);

    let grads = match (params, &trace.latent) {
        (ModelParams::Gwae(p), LatentTrace::Deterministic { enc2 }) => {
            let (g_enc2, d_h1) = layer_backward(&p.enc2, enc2, &operators, nodes, &d_z, true, exec);
            let (g_enc1, _) = layer_backward(&p.enc1, &trace.enc1, &operators, nodes, &d_h1.expect("requested"), false, exec);
            ModelParams::Gwae(GwaeParams {
                enc1: g_enc1,
                enc2: g_enc2,
                decoder,
                latent_activation: p.latent_activation,
            })
        }
        (
            ModelParams::Gwvae(p),
            LatentTrace::Variational {
                mu,
                logsigma,
                logsigma_clamped,
                epsilon,
                ..
            },
        ) => {
            let kl_scale = kl_weight / batch;
            let d_mu = &d_z + &(&mu.output * kl_scale);
            let d_logsigma = ndarray::Zip::from(&d_z)
                .and(epsilon)
                .and(logsigma_clamped)
                .and(&logsigma.output)
                .map_collect(|&dz, &eps, &ls, &raw| {
                    if raw.abs() >= LOGSIGMA_CLAMP {
                        0.0
                    } else {
                        dz * eps * ls.exp() + kl_scale * ((2.0 * ls).exp() - 1.0)
                    }
                });
            let (g_mu, d_h1_mu) = layer_backward(&p.head_mu, mu, &operators, nodes, &d_mu, true, exec);
            let (g_ls, d_h1_ls) = layer_backward(&p.head_logsigma, logsigma, &operators, nodes, &d_logsigma, true, exec);
            let d_h1 = d_h1_mu.expect("requested") + &d_h1_ls.expect("requested");
            let (g_enc1, _) = layer_backward(&p.enc1, &trace.enc1, &operators, nodes, &d_h1, false, exec);
            ModelParams::Gwvae(GwvaeParams {
                enc1: g_enc1,
                head_mu: g_mu,
                head_logsigma: g_ls,
                decoder,
            })
        }
        _ => unreachable!("trace latent always matches the model kind"),
    };

    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("grad {name}")));
    }
    Ok((loss, grads))
}
