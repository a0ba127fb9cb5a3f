//! Layer primitives with hand-written backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_forward(x: &Tensor3, slope: f64) -> Tensor3 {
    Tensor3::from_vec(x.c, x.h, x.w, x.data.iter().map(|&v| leaky_relu(v, slope)).collect())
}

pub fn leaky_relu_backward(x: &Tensor3, grad_out: &Tensor3, slope: f64) -> Tensor3 {
    let data = x
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&v, &g)| if v >= 0.0 { g } else { slope * g })
        .collect();
    Tensor3::from_vec(x.c, x.h, x.w, data)
}

/// Uniform in `±gain·sqrt(3/fan_in)` with the leaky-ReLU gain
/// `sqrt(2/(1+slope²))`.
fn kaiming_uniform(rng: &mut impl Rng, n: usize, fan_in: usize, slope: f64) -> Vec<f64> {
    let gain = (2.0 / (1.0 + slope * slope)).sqrt();
    let bound = gain * (3.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Stride-1 cross-correlation with zero "same" padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub struct ConvGrads {
    pub input: Tensor3,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size must be odd, got {kernel}")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::invalid("channel counts must be positive"));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weights: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn init(&mut self, rng: &mut impl Rng, slope: f64) {
        let fan_in = self.in_channels * self.kernel * self.kernel;
        self.weights = kaiming_uniform(rng, self.weights.len(), fan_in, slope);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.c != self.in_channels {
            return Err(Error::invalid(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, x.c
            )));
        }
        Ok(())
    }

    // Calls f(tap, output offset, input offset, run length) for every
    // contiguous run of valid positions of every kernel tap.
    fn for_each_tap(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
        let pad = (self.kernel / 2) as isize;
        let (hi, wi) = (h as isize, w as isize);
        for ky in 0..self.kernel {
            let dy = ky as isize - pad;
            let (y0, y1) = ((-dy).max(0), (hi - dy).min(hi));
            for kx in 0..self.kernel {
                let dx = kx as isize - pad;
                let (x0, x1) = ((-dx).max(0), (wi - dx).min(wi));
                if x0 >= x1 {
                    continue;
                }
                for y in y0..y1 {
                    f(
                        ky * self.kernel + kx,
                        (y * wi + x0) as usize,
                        ((y + dy) * wi + x0 + dx) as usize,
                        (x1 - x0) as usize,
                    );
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let (h, w) = (x.h, x.w);
        let plane = h * w;
        let mut out = Tensor3::zeros(self.out_channels, h, w);
        let kk = self.kernel * self.kernel;
        for o in 0..self.out_channels {
            let dst = &mut out.data[o * plane..(o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = x.channel(i);
                let wbase = self.widx(o, i, 0, 0);
                let taps = &self.weights[wbase..wbase + kk];
                self.for_each_tap(h, w, |tap, out_at, in_at, len| {
                    let wv = taps[tap];
                    for (d, s) in dst[out_at..out_at + len].iter_mut().zip(&src[in_at..in_at + len]) {
                        *d += wv * s;
                    }
                });
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<ConvGrads> {
        self.check(x)?;
        if grad_out.shape() != (self.out_channels, x.h, x.w) {
            return Err(Error::invalid("conv output gradient has the wrong shape"));
        }
        let (h, w) = (x.h, x.w);
        let plane = h * w;
        let kk = self.kernel * self.kernel;
        let mut grad_in = Tensor3::zeros(x.c, h, w);
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.out_channels];
        for o in 0..self.out_channels {
            let g = grad_out.channel(o);
            grad_b[o] = g.iter().sum();
            for i in 0..self.in_channels {
                let src = x.channel(i);
                let wbase = self.widx(o, i, 0, 0);
                let taps = &self.weights[wbase..wbase + kk];
                let gw = &mut grad_w[wbase..wbase + kk];
                let gin = &mut grad_in.data[i * plane..(i + 1) * plane];
                self.for_each_tap(h, w, |tap, out_at, in_at, len| {
                    let wv = taps[tap];
                    let mut acc = 0.0;
                    for ((gi, s), go) in gin[in_at..in_at + len]
                        .iter_mut()
                        .zip(&src[in_at..in_at + len])
                        .zip(&g[out_at..out_at + len])
                    {
                        *gi += wv * go;
                        acc += go * s;
                    }
                    gw[tap] += acc;
                });
            }
        }
        Ok(ConvGrads {
            input: grad_in,
            weights: grad_w,
            bias: grad_b,
        })
    }
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the output and, per output cell, the flat input index that won.
pub fn maxpool_forward(x: &Tensor3) -> Result<(Tensor3, Vec<usize>)> {
    let (oh, ow) = (x.h / 2, x.w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::invalid(format!(
            "cannot 2x2-pool a {}x{} map",
            x.h, x.w
        )));
    }
    let mut out = Tensor3::zeros(x.c, oh, ow);
    let mut argmax = Vec::with_capacity(out.len());
    for c in 0..x.c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut best_idx = x.idx(c, 2 * y, 2 * xo);
                let mut best = x.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = x.idx(c, 2 * y + dy, 2 * xo + dx);
                    if x.data[idx] > best {
                        best = x.data[idx];
                        best_idx = idx;
                    }
                }
                let o = out.idx(c, y, xo);
                out.data[o] = best;
                argmax.push(best_idx);
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool_backward(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    grad_out: &Tensor3,
) -> Result<Tensor3> {
    if argmax.len() != grad_out.len() {
        return Err(Error::invalid("pool gradient does not match the forward pass"));
    }
    let (c, h, w) = input_shape;
    let mut grad_in = Tensor3::zeros(c, h, w);
    for (&idx, &g) in argmax.iter().zip(&grad_out.data) {
        grad_in.data[idx] += g;
    }
    Ok(grad_in)
}

/// Affine layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `[out][in]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::invalid("dense layer sizes must be positive"));
        }
        Ok(Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        })
    }

    pub fn init(&mut self, rng: &mut impl Rng, slope: f64) {
        self.weights = kaiming_uniform(rng, self.weights.len(), self.n_in, slope);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_in {
            return Err(Error::invalid(format!(
                "dense layer expects {} inputs, got {}",
                self.n_in,
                x.len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect())
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<DenseGrads> {
        if x.len() != self.n_in || grad_out.len() != self.n_out {
            return Err(Error::invalid("dense gradient shapes do not match"));
        }
        let mut grad_in = vec![0.0; self.n_in];
        let mut grad_w = vec![0.0; self.weights.len()];
        for (o, &g) in grad_out.iter().enumerate() {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let gw = &mut grad_w[o * self.n_in..(o + 1) * self.n_in];
            for ((gi, gwi), (&w, &v)) in grad_in.iter_mut().zip(gw.iter_mut()).zip(row.iter().zip(x)) {
                *gi += g * w;
                *gwi = g * v;
            }
        }
        Ok(DenseGrads {
            input: grad_in,
            weights: grad_w,
            bias: grad_out.to_vec(),
        })
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// `softmax(logits) − onehot(label)`.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}
