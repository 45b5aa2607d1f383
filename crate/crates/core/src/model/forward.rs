use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use super::{Activation, Affine, Decoder, GwaeParams, GwvaeParams, ModelParams, SgwConvLayer, LOGSIGMA_CLAMP};
use crate::parallel::{matmul, Exec};
use crate::sgwt::WaveletOperator;
use crate::{Error, Result};

/// One graph's node features paired with its wavelet operator.
#[derive(Clone, Copy)]
pub struct GraphInput<'a> {
    pub features: ArrayView2<'a, f64>,
    pub operator: &'a WaveletOperator,
}

/// Intermediates of one SGWConv layer over a stacked batch.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    /// `P^T diag(theta) P` per graph.
    pub filters: Vec<Array2<f64>>,
    /// Filter applied to each graph's rows of `input`.
    pub mixed: Array2<f64>,
    pub pre: Array2<f64>,
    pub output: Array2<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct AffineTrace {
    pub input: Array2<f64>,
    pub pre: Array2<f64>,
}

#[derive(Debug, Clone)]
pub enum LatentTrace {
    Deterministic {
        enc2: LayerTrace,
    },
    Variational {
        mu: LayerTrace,
        logsigma: LayerTrace,
        /// Head output after clamping.
        logsigma_clamped: Array2<f64>,
        epsilon: Array2<f64>,
        z: Array2<f64>,
    },
}

impl LatentTrace {
    pub fn z(&self) -> &Array2<f64> {
        match self {
            LatentTrace::Deterministic { enc2 } => &enc2.output,
            LatentTrace::Variational { z, .. } => z,
        }
    }
}

/// Full forward record of a batch of graphs stacked row-wise.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Nodes per graph.
    pub nodes: usize,
    pub input: Array2<f64>,
    pub enc1: LayerTrace,
    pub latent: LatentTrace,
    pub fc1: AffineTrace,
    pub fc2: AffineTrace,
}

impl ForwardTrace {
    pub fn reconstruction(&self) -> &Array2<f64> {
        &self.fc2.pre
    }

    pub fn num_graphs(&self) -> usize {
        self.input.nrows() / self.nodes
    }
}

/// Latent representation of one graph.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentState {
    Deterministic(Array2<f64>),
    Variational {
        mu: Array2<f64>,
        logsigma: Array2<f64>,
        epsilon: Array2<f64>,
        z: Array2<f64>,
    },
}

fn add_bias(mut m: Array2<f64>, bias: Option<&Array1<f64>>) -> Array2<f64> {
    if let Some(b) = bias {
        m += b;
    }
    m
}

fn layer_forward(
    layer: &SgwConvLayer,
    input: Array2<f64>,
    operators: &[&WaveletOperator],
    nodes: usize,
    activation: Activation,
    exec: Exec,
) -> Result<LayerTrace> {
    if input.ncols() != layer.in_dim() {
        return Err(Error::shape("SGWConv input features", layer.in_dim(), input.ncols()));
    }
    if input.nrows() != operators.len() * nodes {
        return Err(Error::shape(
            "SGWConv input rows",
            format!("{} graphs x {nodes} nodes", operators.len()),
            input.nrows(),
        ));
    }
    let theta = layer.theta.as_slice().expect("contiguous");
    for op in operators {
        if op.num_nodes() != nodes {
            return Err(Error::shape("wavelet operator nodes", nodes, op.num_nodes()));
        }
        if op.matrix.nrows() != theta.len() {
            return Err(Error::shape("wavelet operator rows vs theta", theta.len(), op.matrix.nrows()));
        }
    }
    let filters: Vec<Array2<f64>> = exec
        .map(operators, |op| op.filter(theta))
        .into_iter()
        .collect::<Result<_>>()?;
    let blocks: Vec<Array2<f64>> = exec.map_range(operators.len(), |g| {
        filters[g].dot(&input.slice(s![g * nodes..(g + 1) * nodes, ..]))
    });
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let mixed = concatenate(Axis(0), &views).expect("uniform block widths");
    let pre = add_bias(matmul(exec, mixed.view(), layer.weight.view()), layer.bias.as_ref());
    let output = pre.mapv(|v| activation.apply(v));
    Ok(LayerTrace {
        input,
        filters,
        mixed,
        pre,
        output,
        activation,
    })
}

fn affine_forward(a: &Affine, input: Array2<f64>, exec: Exec) -> Result<AffineTrace> {
    if input.ncols() != a.weight.nrows() {
        return Err(Error::shape("dense layer input", a.weight.nrows(), input.ncols()));
    }
    let pre = matmul(exec, input.view(), a.weight.view()) + &a.bias;
    Ok(AffineTrace { input, pre })
}

fn decoder_forward(decoder: &Decoder, z: Array2<f64>, exec: Exec) -> Result<(AffineTrace, AffineTrace)> {
    let fc1 = affine_forward(&decoder.fc1, z, exec)?;
    let hidden = fc1.pre.mapv(|v| v.max(0.0));
    let fc2 = affine_forward(&decoder.fc2, hidden, exec)?;
    Ok((fc1, fc2))
}

fn clamp_logsigma(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.clamp(-LOGSIGMA_CLAMP, LOGSIGMA_CLAMP))
}

/// Forward pass over several graphs at once. `epsilon` (stacked, one row per
/// node) is only used by GWVAE; `None` means the mean latent.
pub fn forward_batch(
    params: &ModelParams,
    graphs: &[GraphInput<'_>],
    epsilon: Option<&Array2<f64>>,
    exec: Exec,
) -> Result<ForwardTrace> {
    let first = graphs.first().ok_or_else(|| Error::Data("empty batch".into()))?;
    let nodes = first.features.nrows();
    if graphs.iter().any(|g| g.features.nrows() != nodes) {
        return Err(Error::shape("batch", format!("{nodes} nodes per graph"), "mixed graph sizes"));
    }
    let views: Vec<_> = graphs.iter().map(|g| g.features).collect();
    let input = concatenate(Axis(0), &views)
        .map_err(|_| Error::shape("batch features", params.input_dim(), "mixed feature widths"))?;
    let operators: Vec<&WaveletOperator> = graphs.iter().map(|g| g.operator).collect();

    let enc1 = layer_forward(params.enc1(), input.clone(), &operators, nodes, Activation::Relu, exec)?;
    let latent = match params {
        ModelParams::Gwae(p) => {
            let enc2 = layer_forward(&p.enc2, enc1.output.clone(), &operators, nodes, p.latent_activation, exec)?;
            LatentTrace::Deterministic { enc2 }
        }
        ModelParams::Gwvae(p) => {
            let mu = layer_forward(&p.head_mu, enc1.output.clone(), &operators, nodes, Activation::Identity, exec)?;
            let logsigma = layer_forward(
                &p.head_logsigma,
                enc1.output.clone(),
                &operators,
                nodes,
                Activation::Identity,
                exec,
            )?;
            let epsilon = match epsilon {
                Some(e) if e.dim() != mu.output.dim() => {
                    return Err(Error::shape(
                        "epsilon",
                        format!("{:?}", mu.output.dim()),
                        format!("{:?}", e.dim()),
                    ))
                }
                Some(e) => e.clone(),
                None => Array2::zeros(mu.output.dim()),
            };
            let logsigma_clamped = clamp_logsigma(&logsigma.output);
            let z = &mu.output + &(logsigma_clamped.mapv(f64::exp) * &epsilon);
            LatentTrace::Variational {
                mu,
                logsigma,
                logsigma_clamped,
                epsilon,
                z,
            }
        }
    };
    let (fc1, fc2) = decoder_forward(params.decoder(), latent.z().clone(), exec)?;
    Ok(ForwardTrace {
        nodes,
        input,
        enc1,
        latent,
        fc1,
        fc2,
    })
}

/// `act(P^T diag(theta) P X W + b)` for a single graph.
pub fn sgwconv_forward(
    layer: &SgwConvLayer,
    features: ArrayView2<'_, f64>,
    operator: &WaveletOperator,
    activation: Activation,
) -> Result<Array2<f64>> {
    let trace = layer_forward(
        layer,
        features.to_owned(),
        &[operator],
        features.nrows(),
        activation,
        Exec::Sequential,
    )?;
    Ok(trace.output)
}

/// Two stacked SGWConv layers, ReLU after the first and the configured
/// latent activation after the second.
pub fn encode_gwae(params: &GwaeParams, features: ArrayView2<'_, f64>, operator: &WaveletOperator) -> Result<Array2<f64>> {
    let h = sgwconv_forward(&params.enc1, features, operator, Activation::Relu)?;
    sgwconv_forward(&params.enc2, h.view(), operator, params.latent_activation)
}

/// Shared first layer, then unconstrained mean and log-sigma heads.
pub fn encode_gwvae(
    params: &GwvaeParams,
    features: ArrayView2<'_, f64>,
    operator: &WaveletOperator,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let h = sgwconv_forward(&params.enc1, features, operator, Activation::Relu)?;
    let mu = sgwconv_forward(&params.head_mu, h.view(), operator, Activation::Identity)?;
    let logsigma = sgwconv_forward(&params.head_logsigma, h.view(), operator, Activation::Identity)?;
    Ok((mu, logsigma))
}

/// `mu + exp(clamp(logsigma)) * epsilon`.
pub fn reparameterize(mu: &Array2<f64>, logsigma: &Array2<f64>, epsilon: &Array2<f64>) -> Result<Array2<f64>> {
    if mu.dim() != logsigma.dim() || mu.dim() != epsilon.dim() {
        return Err(Error::shape(
            "reparameterize",
            format!("{:?}", mu.dim()),
            format!("{:?} / {:?}", logsigma.dim(), epsilon.dim()),
        ));
    }
    Ok(mu + &(clamp_logsigma(logsigma).mapv(f64::exp) * epsilon))
}

/// Row-wise two-layer perceptron, ReLU hidden layer, linear output.
pub fn decode(decoder: &Decoder, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (_, fc2) = decoder_forward(decoder, z.to_owned(), Exec::Sequential)?;
    Ok(fc2.pre)
}

/// Reconstruct one graph. GWVAE uses `epsilon` (zeros when `None`).
pub fn reconstruct(
    params: &ModelParams,
    input: GraphInput<'_>,
    epsilon: Option<&Array2<f64>>,
) -> Result<(Array2<f64>, LatentState)> {
    let trace = forward_batch(params, &[input], epsilon, Exec::Sequential)?;
    let latent = match trace.latent {
        LatentTrace::Deterministic { enc2 } => LatentState::Deterministic(enc2.output),
        LatentTrace::Variational { mu, logsigma, epsilon, z, .. } => LatentState::Variational {
            mu: mu.output,
            logsigma: logsigma.output,
            epsilon,
            z,
        },
    };
    Ok((trace.fc2.pre, latent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_path_graph, eigendecompose, laplacian};
    use crate::ingest::Label;
    use crate::model::{ModelConfig, ModelKind};
    use crate::sgwt::{build_wavelet_operator, KernelConfig};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::rng::stream(seed, "fwd-test");
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    fn operator(x: &Array2<f64>, kernel: &KernelConfig) -> WaveletOperator {
        let windows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let g = build_path_graph(&windows, Label::Normal, "t").unwrap();
        build_wavelet_operator(&eigendecompose(&laplacian(&g.adjacency)).unwrap(), kernel).unwrap()
    }

    fn toy(kind: ModelKind, seed: u64) -> (ModelParams, Array2<f64>, WaveletOperator) {
        let cfg = ModelConfig { kind, input_dim: 6, hidden_dim: 5, latent_dim: 3, graph_size: 4, ..Default::default() };
        let kernel = KernelConfig::default();
        let x = random_matrix(4, 6, seed);
        let op = operator(&x, &kernel);
        (ModelParams::init(&cfg, &kernel, seed).unwrap(), x, op)
    }

    #[test]
    fn sgwconv_identity_filter_matches_direct_product() {
        let x = random_matrix(10, 7, 1);
        let op = operator(&x, &KernelConfig::default());
        let layer = SgwConvLayer { theta: Array1::ones(30), weight: Array2::eye(7), bias: None };
        let out = sgwconv_forward(&layer, x.view(), &op, Activation::Identity).unwrap();
        // independent route: explicit P^T P then times X, summed by hand
        let p = &op.matrix;
        let mut ptp = Array2::<f64>::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                ptp[(i, j)] = (0..30).map(|k| p[(k, i)] * p[(k, j)]).sum();
            }
        }
        let expect = ptp.dot(&x);
        assert!((&out - &expect).iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn sgwconv_zero_input_gives_bias() {
        let x = Array2::zeros((10, 4));
        let op = operator(&random_matrix(10, 4, 2), &KernelConfig::default());
        let layer = SgwConvLayer {
            theta: Array1::ones(30),
            weight: random_matrix(4, 3, 3),
            bias: Some(ndarray::array![0.5, -0.5, 0.0]),
        };
        let out = sgwconv_forward(&layer, x.view(), &op, Activation::Relu).unwrap();
        for row in out.rows() {
            assert_eq!(row.to_vec(), vec![0.5, 0.0, 0.0]);
        }
        let no_bias = SgwConvLayer { bias: None, ..layer.clone() };
        assert!(sgwconv_forward(&no_bias, x.view(), &op, Activation::Identity).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgwconv_shape_errors() {
        let op = operator(&random_matrix(10, 4, 2), &KernelConfig::default());
        let layer = SgwConvLayer { theta: Array1::ones(30), weight: Array2::eye(5), bias: None };
        let err = sgwconv_forward(&layer, Array2::zeros((10, 4)).view(), &op, Activation::Relu).unwrap_err();
        assert!(err.to_string().contains("expected 5"), "{err}");
        let short = SgwConvLayer { theta: Array1::ones(29), weight: Array2::eye(4), bias: None };
        assert!(sgwconv_forward(&short, Array2::zeros((10, 4)).view(), &op, Activation::Relu).is_err());
    }

    #[test]
    fn default_dims_shapes() {
        let cfg = ModelConfig { kind: ModelKind::Gwvae, ..Default::default() };
        let kernel = KernelConfig::default();
        let x = random_matrix(10, 1024, 4);
        let op = operator(&x, &kernel);
        let ModelParams::Gwvae(p) = ModelParams::init(&cfg, &kernel, 0).unwrap() else { unreachable!() };
        let (mu, ls) = encode_gwvae(&p, x.view(), &op).unwrap();
        assert_eq!(mu.dim(), (10, 512));
        assert_eq!(ls.dim(), (10, 512));
        let h = sgwconv_forward(&p.enc1, x.view(), &op, Activation::Relu).unwrap();
        assert_eq!(h.dim(), (10, 1024));
        assert_eq!(sgwconv_forward(&p.head_mu, h.view(), &op, Activation::Relu).unwrap().dim(), (10, 512));
        assert_eq!(decode(&p.decoder, mu.view()).unwrap().dim(), (10, 1024));
    }

    #[test]
    fn gwae_latent_is_nonnegative_and_zero_params_give_zero() {
        let (params, x, op) = toy(ModelKind::Gwae, 5);
        let ModelParams::Gwae(p) = &params else { unreachable!() };
        assert!(encode_gwae(p, x.view(), &op).unwrap().iter().all(|&v| v >= 0.0));
        let ModelParams::Gwae(zero) = params.zeros_like() else { unreachable!() };
        assert!(encode_gwae(&zero, x.view(), &op).unwrap().iter().all(|&v| v == 0.0));
        let (xhat, _) = reconstruct(&params.zeros_like(), GraphInput { features: x.view(), operator: &op }, None).unwrap();
        assert!(xhat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gwvae_zero_heads_and_determinism() {
        let (params, x, op) = toy(ModelKind::Gwvae, 6);
        let ModelParams::Gwvae(mut p) = params else { unreachable!() };
        let a = encode_gwvae(&p, x.view(), &op).unwrap();
        let b = encode_gwvae(&p, x.view(), &op).unwrap();
        assert_eq!(a, b);
        p.head_mu = p.head_mu.zeros_like();
        p.head_logsigma = p.head_logsigma.zeros_like();
        let (mu, ls) = encode_gwvae(&p, x.view(), &op).unwrap();
        assert!(mu.iter().chain(ls.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn reparameterize_cases() {
        let mu = random_matrix(3, 2, 7);
        let zero = Array2::zeros((3, 2));
        assert_eq!(reparameterize(&mu, &zero, &zero).unwrap(), mu);
        let ones = Array2::ones((3, 2));
        assert_eq!(reparameterize(&mu, &zero, &ones).unwrap(), &mu + 1.0);
        let huge = Array2::from_elem((3, 2), 1e3);
        let z = reparameterize(&zero, &huge, &ones).unwrap();
        assert!(z.iter().all(|&v| v == 10f64.exp()));
        assert!(reparameterize(&mu, &Array2::zeros((2, 2)), &ones).is_err());
    }

    #[test]
    fn reparameterize_monte_carlo_moments() {
        let n = 100_000;
        let mut rng = crate::rng::stream(11, "mc");
        let eps = Array2::from_shape_simple_fn((n, 1), || StandardNormal.sample(&mut rng));
        let zero = Array2::zeros((n, 1));
        let z = reparameterize(&zero, &zero, &eps).unwrap();
        let mean = z.sum() / n as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.05, "var {var}");
    }

    #[test]
    fn decode_is_row_local() {
        let (params, _, _) = toy(ModelKind::Gwae, 8);
        let dec = params.decoder();
        let z = random_matrix(4, 3, 9).mapv(f64::abs);
        let base = decode(dec, z.view()).unwrap();
        // permute rows
        let perm = [2, 0, 3, 1];
        let zp = Array2::from_shape_fn(z.dim(), |(i, j)| z[(perm[i], j)]);
        let out = decode(dec, zp.view()).unwrap();
        for (i, &pi) in perm.iter().enumerate() {
            assert_eq!(out.row(i), base.row(pi));
        }
        // perturb one row
        let mut z2 = z.clone();
        z2[(1, 0)] += 0.7;
        let out2 = decode(dec, z2.view()).unwrap();
        for i in [0, 2, 3] {
            assert_eq!(out2.row(i), base.row(i));
        }
        assert_eq!(decode(dec, Array2::zeros((2, 3)).view()).unwrap(), Array2::<f64>::zeros((2, 6)));
    }

    #[test]
    fn batch_matches_single_graph_passes() {
        let (params, x1, op1) = toy(ModelKind::Gwvae, 10);
        let x2 = random_matrix(4, 6, 12);
        let op2 = operator(&x2, &KernelConfig::default());
        let eps = random_matrix(8, 3, 13);
        let batch = [
            GraphInput { features: x1.view(), operator: &op1 },
            GraphInput { features: x2.view(), operator: &op2 },
        ];
        let trace = forward_batch(&params, &batch, Some(&eps), Exec::Parallel).unwrap();
        let e1 = eps.slice(s![0..4, ..]).to_owned();
        let e2 = eps.slice(s![4..8, ..]).to_owned();
        let (r1, _) = reconstruct(&params, batch[0], Some(&e1)).unwrap();
        let (r2, _) = reconstruct(&params, batch[1], Some(&e2)).unwrap();
        let stacked = concatenate(Axis(0), &[r1.view(), r2.view()]).unwrap();
        assert!((trace.reconstruction() - &stacked).iter().all(|v| v.abs() < 1e-12));
    }
}
