//! Graph wavelet autoencoders: SGWConv encoder layers, the variational
//! heads and the two-layer perceptron decoder. Forward evaluation only;
//! gradients live in [`crate::training`].

mod forward;

pub use forward::{
    decode, encode_gwae, encode_gwvae, forward_batch, reconstruct, reparameterize, sgwconv_forward,
    AffineTrace, ForwardTrace, GraphInput, LatentState, LatentTrace, LayerTrace,
};

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, STREAM_INIT};
use crate::sgwt::KernelConfig;
use crate::{Error, Result};

/// Magnitude bound applied to log-sigma before exponentiation.
pub const LOGSIGMA_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Gwae,
    Gwvae,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gwae => "gwae",
            ModelKind::Gwvae => "gwvae",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gwae" => Ok(ModelKind::Gwae),
            "gwvae" => Ok(ModelKind::Gwvae),
            other => Err(Error::Config(format!("unknown model kind `{other}` (expected gwae or gwvae)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` (0 at the ReLU kink).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Node feature dimension (window length).
    pub input_dim: usize,
    /// Width of the first encoder layer and of the decoder's hidden layer.
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Nodes per graph; fixes the wavelet filter length.
    pub graph_size: usize,
    /// Add a bias to each SGWConv layer.
    pub sgw_bias: bool,
    /// Activation on the GWAE latent layer.
    pub latent_activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gwae,
            input_dim: 1024,
            hidden_dim: 1024,
            latent_dim: 512,
            graph_size: 10,
            sgw_bias: true,
            latent_activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config("model dimensions must be >= 1".into()));
        }
        if self.graph_size < 2 {
            return Err(Error::Config("graph_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// One spectral graph wavelet convolution:
/// `act(P^T diag(theta) P X W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgwConvLayer {
    pub theta: Array1<f64>,
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl SgwConvLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn init(rng: &mut impl Rng, filter_len: usize, d_in: usize, d_out: usize, bias: bool) -> Self {
        Self {
            theta: Array1::ones(filter_len),
            weight: uniform_fan_in(rng, d_in, d_out),
            bias: bias.then(|| Array1::zeros(d_out)),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            theta: Array1::zeros(self.theta.len()),
            weight: Array2::zeros(self.weight.dim()),
            bias: self.bias.as_ref().map(|b| Array1::zeros(b.len())),
        }
    }
}

/// Row-wise affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    fn init(rng: &mut impl Rng, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: uniform_fan_in(rng, d_in, d_out),
            bias: Array1::zeros(d_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub fc1: Affine,
    pub fc2: Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwaeParams {
    pub enc1: SgwConvLayer,
    pub enc2: SgwConvLayer,
    pub decoder: Decoder,
    pub latent_activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwvaeParams {
    pub enc1: SgwConvLayer,
    pub head_mu: SgwConvLayer,
    pub head_logsigma: SgwConvLayer,
    pub decoder: Decoder,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Gwae(GwaeParams),
    Gwvae(GwvaeParams),
}

fn uniform_fan_in(rng: &mut impl Rng, d_in: usize, d_out: usize) -> Array2<f64> {
    let bound = 1.0 / (d_in as f64).sqrt();
    Array2::from_shape_simple_fn((d_in, d_out), || rng.random_range(-bound..bound))
}

/// Borrowed view of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub data: &'a mut [f64],
}

fn push_layer<'a>(out: &mut Vec<TensorRef<'a>>, prefix: &str, layer: &'a SgwConvLayer) {
    out.push(TensorRef {
        name: format!("{prefix}.theta"),
        shape: vec![layer.theta.len()],
        data: layer.theta.as_slice().expect("contiguous"),
    });
    out.push(TensorRef {
        name: format!("{prefix}.weight"),
        shape: layer.weight.shape().to_vec(),
        data: layer.weight.as_slice().expect("contiguous"),
    });
    if let Some(b) = &layer.bias {
        out.push(TensorRef {
            name: format!("{prefix}.bias"),
            shape: vec![b.len()],
            data: b.as_slice().expect("contiguous"),
        });
    }
}

fn push_layer_mut<'a>(out: &mut Vec<TensorMut<'a>>, prefix: &str, layer: &'a mut SgwConvLayer) {
    out.push(TensorMut {
        name: format!("{prefix}.theta"),
        data: layer.theta.as_slice_mut().expect("contiguous"),
    });
    out.push(TensorMut {
        name: format!("{prefix}.weight"),
        data: layer.weight.as_slice_mut().expect("contiguous"),
    });
    if let Some(b) = &mut layer.bias {
        out.push(TensorMut {
            name: format!("{prefix}.bias"),
            data: b.as_slice_mut().expect("contiguous"),
        });
    }
}

fn push_affine<'a>(out: &mut Vec<TensorRef<'a>>, prefix: &str, a: &'a Affine) {
    out.push(TensorRef {
        name: format!("{prefix}.weight"),
        shape: a.weight.shape().to_vec(),
        data: a.weight.as_slice().expect("contiguous"),
    });
    out.push(TensorRef {
        name: format!("{prefix}.bias"),
        shape: vec![a.bias.len()],
        data: a.bias.as_slice().expect("contiguous"),
    });
}

fn push_affine_mut<'a>(out: &mut Vec<TensorMut<'a>>, prefix: &str, a: &'a mut Affine) {
    out.push(TensorMut {
        name: format!("{prefix}.weight"),
        data: a.weight.as_slice_mut().expect("contiguous"),
    });
    out.push(TensorMut {
        name: format!("{prefix}.bias"),
        data: a.bias.as_slice_mut().expect("contiguous"),
    });
}

impl ModelParams {
    /// Deterministic initialization: filters at one, weights uniform in
    /// `+-1/sqrt(fan_in)`, biases at zero.
    pub fn init(model: &ModelConfig, kernel: &KernelConfig, seed: u64) -> Result<Self> {
        model.validate()?;
        kernel.validate()?;
        let mut rng = stream(seed, STREAM_INIT);
        let filter_len = kernel.operator_rows(model.graph_size);
        let (d, hid, h) = (model.input_dim, model.hidden_dim, model.latent_dim);
        let enc1 = SgwConvLayer::init(&mut rng, filter_len, d, hid, model.sgw_bias);
        Ok(match model.kind {
            ModelKind::Gwae => {
                let enc2 = SgwConvLayer::init(&mut rng, filter_len, hid, h, model.sgw_bias);
                let decoder = Decoder {
                    fc1: Affine::init(&mut rng, h, hid),
                    fc2: Affine::init(&mut rng, hid, d),
                };
                ModelParams::Gwae(GwaeParams {
                    enc1,
                    enc2,
                    decoder,
                    latent_activation: model.latent_activation,
                })
            }
            ModelKind::Gwvae => {
                let head_mu = SgwConvLayer::init(&mut rng, filter_len, hid, h, model.sgw_bias);
                let head_logsigma = SgwConvLayer::init(&mut rng, filter_len, hid, h, model.sgw_bias);
                let decoder = Decoder {
                    fc1: Affine::init(&mut rng, h, hid),
                    fc2: Affine::init(&mut rng, hid, d),
                };
                ModelParams::Gwvae(GwvaeParams {
                    enc1,
                    head_mu,
                    head_logsigma,
                    decoder,
                })
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gwae(_) => ModelKind::Gwae,
            ModelParams::Gwvae(_) => ModelKind::Gwvae,
        }
    }

    pub fn enc1(&self) -> &SgwConvLayer {
        match self {
            ModelParams::Gwae(p) => &p.enc1,
            ModelParams::Gwvae(p) => &p.enc1,
        }
    }

    pub fn decoder(&self) -> &Decoder {
        match self {
            ModelParams::Gwae(p) => &p.decoder,
            ModelParams::Gwvae(p) => &p.decoder,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc1().in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder().fc1.weight.nrows()
    }

    pub fn filter_len(&self) -> usize {
        self.enc1().theta.len()
    }

    /// Same structure, every entry zero.
    pub fn zeros_like(&self) -> Self {
        let dec = |d: &Decoder| Decoder {
            fc1: d.fc1.zeros_like(),
            fc2: d.fc2.zeros_like(),
        };
        match self {
            ModelParams::Gwae(p) => ModelParams::Gwae(GwaeParams {
                enc1: p.enc1.zeros_like(),
                enc2: p.enc2.zeros_like(),
                decoder: dec(&p.decoder),
                latent_activation: p.latent_activation,
            }),
            ModelParams::Gwvae(p) => ModelParams::Gwvae(GwvaeParams {
                enc1: p.enc1.zeros_like(),
                head_mu: p.head_mu.zeros_like(),
                head_logsigma: p.head_logsigma.zeros_like(),
                decoder: dec(&p.decoder),
            }),
        }
    }

    /// All tensors in a fixed order with dotted names.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        match self {
            ModelParams::Gwae(p) => {
                push_layer(&mut out, "enc1", &p.enc1);
                push_layer(&mut out, "enc2", &p.enc2);
                push_affine(&mut out, "dec_fc1", &p.decoder.fc1);
                push_affine(&mut out, "dec_fc2", &p.decoder.fc2);
            }
            ModelParams::Gwvae(p) => {
                push_layer(&mut out, "enc1", &p.enc1);
                push_layer(&mut out, "head_mu", &p.head_mu);
                push_layer(&mut out, "head_logsigma", &p.head_logsigma);
                push_affine(&mut out, "dec_fc1", &p.decoder.fc1);
                push_affine(&mut out, "dec_fc2", &p.decoder.fc2);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        match self {
            ModelParams::Gwae(p) => {
                push_layer_mut(&mut out, "enc1", &mut p.enc1);
                push_layer_mut(&mut out, "enc2", &mut p.enc2);
                push_affine_mut(&mut out, "dec_fc1", &mut p.decoder.fc1);
                push_affine_mut(&mut out, "dec_fc2", &mut p.decoder.fc2);
            }
            ModelParams::Gwvae(p) => {
                push_layer_mut(&mut out, "enc1", &mut p.enc1);
                push_layer_mut(&mut out, "head_mu", &mut p.head_mu);
                push_layer_mut(&mut out, "head_logsigma", &mut p.head_logsigma);
                push_affine_mut(&mut out, "dec_fc1", &mut p.decoder.fc1);
                push_affine_mut(&mut out, "dec_fc2", &mut p.decoder.fc2);
            }
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Name of the first tensor holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }
}
