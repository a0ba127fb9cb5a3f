//! Sequential CNN classifier and its checkpoint format.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    leaky_relu_backward, leaky_relu_forward, maxpool_backward, maxpool_forward, softmax, Conv2d, Dense,
};
use super::optim::AdamState;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// conv3×3·16 → pool → conv3×3·32 → pool → dense 128 → dense n
    #[default]
    Shallow,
    /// Three VGG blocks of two 3×3 convolutions (16, 32, 64 channels)
    /// followed by dense 256 → dense n.
    DeepVgg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub n_classes: usize,
    pub leaky_slope: f64,
    /// (n_filt, frames)
    pub input_shape: (usize, usize),
}

impl ModelConfig {
    pub fn new(architecture: Architecture, n_classes: usize, input_shape: (usize, usize)) -> Self {
        Self {
            architecture,
            n_classes,
            leaky_slope: 0.33,
            input_shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv(Conv2d),
    LeakyRelu,
    MaxPool,
    Flatten,
    Dense(Dense),
}

/// Per-layer inputs (and pool routes) kept for the backward pass.
pub struct Trace {
    inputs: Vec<Tensor3>,
    routes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
}

impl Model {
    /// Builds the architecture and draws Kaiming-uniform weights from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        if config.n_classes < 2 {
            return Err(Error::invalid("a classifier needs at least 2 classes"));
        }
        if !(config.leaky_slope > 0.0 && config.leaky_slope < 1.0) {
            return Err(Error::invalid(format!(
                "leaky slope must be in (0,1), got {}",
                config.leaky_slope
            )));
        }
        let (mut h, mut w) = config.input_shape;
        if h == 0 || w == 0 {
            return Err(Error::invalid("input shape must be non-empty"));
        }
        let mut layers = Vec::new();
        let mut channels = 1;
        let pool = |h: &mut usize, w: &mut usize, layers: &mut Vec<Layer>| -> Result<()> {
            if *h < 2 || *w < 2 {
                return Err(Error::invalid(format!(
                    "input {:?} too small for {:?}",
                    config.input_shape, config.architecture
                )));
            }
            *h /= 2;
            *w /= 2;
            layers.push(Layer::MaxPool);
            Ok(())
        };
        let blocks: &[&[usize]] = match config.architecture {
            Architecture::Shallow => &[&[16], &[32]],
            Architecture::DeepVgg => &[&[16, 16], &[32, 32], &[64, 64]],
        };
        for block in blocks {
            for &out in *block {
                layers.push(Layer::Conv(Conv2d::new(channels, out, 3)?));
                layers.push(Layer::LeakyRelu);
                channels = out;
            }
            pool(&mut h, &mut w, &mut layers)?;
        }
        let hidden = match config.architecture {
            Architecture::Shallow => 128,
            Architecture::DeepVgg => 256,
        };
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense(Dense::new(channels * h * w, hidden)?));
        layers.push(Layer::LeakyRelu);
        layers.push(Layer::Dense(Dense::new(hidden, config.n_classes)?));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut layers {
            match layer {
                Layer::Conv(c) => c.init(&mut rng, config.leaky_slope),
                Layer::Dense(d) => d.init(&mut rng, config.leaky_slope),
                _ => {}
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        let (h, w) = self.config.input_shape;
        if x.shape() != (1, h, w) {
            return Err(Error::invalid(format!(
                "model expects input 1x{h}x{w}, got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.0)
    }

    /// Class probabilities.
    pub fn predict_proba(&self, x: &Tensor3) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x)?))
    }

    pub fn forward_trace(&self, x: &Tensor3) -> Result<(Vec<f64>, Trace)> {
        self.check_input(x)?;
        let slope = self.config.leaky_slope;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut routes = Vec::new();
        let mut cur = x.clone();
        for layer in &self.layers {
            let next = match layer {
                Layer::Conv(c) => c.forward(&cur)?,
                Layer::LeakyRelu => leaky_relu_forward(&cur, slope),
                Layer::MaxPool => {
                    let (out, route) = maxpool_forward(&cur)?;
                    routes.push(route);
                    out
                }
                Layer::Flatten => {
                    let n = cur.len();
                    cur.clone().reshape(n, 1, 1)
                }
                Layer::Dense(d) => {
                    let out = d.forward(&cur.data)?;
                    let n = out.len();
                    Tensor3::from_vec(n, 1, 1, out)
                }
            };
            inputs.push(std::mem::replace(&mut cur, next));
        }
        Ok((cur.data, Trace { inputs, routes }))
    }

    /// Returns the input gradient and parameter gradients in
    /// [`Model::params`] order.
    pub fn backward(&self, trace: &Trace, grad_logits: &[f64]) -> Result<(Tensor3, Vec<Vec<f64>>)> {
        let slope = self.config.leaky_slope;
        let mut grad = Tensor3::from_vec(grad_logits.len(), 1, 1, grad_logits.to_vec());
        let mut param_grads: Vec<Vec<f64>> = Vec::new();
        let mut route_idx = trace.routes.len();
        for (layer, input) in self.layers.iter().zip(&trace.inputs).rev() {
            grad = match layer {
                Layer::Conv(c) => {
                    let g = c.backward(input, &grad)?;
                    param_grads.push(g.bias);
                    param_grads.push(g.weights);
                    g.input
                }
                Layer::LeakyRelu => leaky_relu_backward(input, &grad, slope),
                Layer::MaxPool => {
                    route_idx -= 1;
                    maxpool_backward(input.shape(), &trace.routes[route_idx], &grad)?
                }
                Layer::Flatten => grad.reshape(input.c, input.h, input.w),
                Layer::Dense(d) => {
                    let g = d.backward(&input.data, &grad.data)?;
                    param_grads.push(g.bias);
                    param_grads.push(g.weights);
                    Tensor3::from_vec(input.c, input.h, input.w, g.input)
                }
            };
        }
        param_grads.reverse();
        Ok((grad, param_grads))
    }

    /// Parameter buffers in a fixed order: per layer, weights then bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&c.weights);
                    out.push(&c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    out.push(&d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.param_sizes().iter().sum()
    }
}

pub const CHECKPOINT_FORMAT: &str = "fbank-egl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume or reuse a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub epoch: usize,
    pub params: Vec<Vec<f64>>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(model: &Model, epoch: usize, adam: Option<AdamState>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.config,
            epoch,
            params: model.params().iter().map(|p| p.to_vec()).collect(),
            adam,
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut model = Model::new(self.config, 0)?;
        if model.param_sizes() != self.params.iter().map(Vec::len).collect::<Vec<_>>() {
            return Err(Error::invalid("checkpoint parameters do not match its architecture"));
        }
        for (dst, src) in model.params_mut().into_iter().zip(&self.params) {
            dst.copy_from_slice(src);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}
