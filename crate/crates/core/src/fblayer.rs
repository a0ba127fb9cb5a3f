//! The filter bank learning layer.
//!
//! Forward: `m[i,t] = Σ_j W[i,j] f[j,t]`, `l[i,t] = ln(relu(m[i,t]) + ε)`.
//!
//! Backward uses the exact derivative `∂l/∂m = 1{m>0} / (relu(m) + ε)`.
//! [`GradientRule::Unscaled`] drops the `1/(relu(m)+ε)` factor and keeps only
//! the indicator gate, for comparison runs.

use serde::{Deserialize, Serialize};

use crate::dsp::PowerSpectrogram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::melbank::{FilterBank, Provenance};

pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientRule {
    /// True derivative of `ln(relu(m) + ε)`.
    #[default]
    Exact,
    /// Indicator gate only, without the `1/(relu(m)+ε)` factor.
    Unscaled,
}

/// Weights and settings of the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FbLayer {
    bank: FilterBank,
    epsilon: f64,
    trainable: bool,
    rule: GradientRule,
}

/// Values from a forward pass needed by [`FbLayer::backward`].
#[derive(Debug, Clone)]
pub struct FbLayerCache<'a> {
    /// n_filt × T pre-activation energies.
    pub m: Matrix,
    /// The T × n_bins input frames.
    pub frames: &'a Matrix,
}

impl FbLayer {
    pub fn new(bank: FilterBank, epsilon: f64, trainable: bool) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self {
            bank,
            epsilon,
            trainable,
            rule: GradientRule::Exact,
        })
    }

    pub fn with_gradient_rule(mut self, rule: GradientRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn weights(&self) -> &Matrix {
        self.bank.weights()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn gradient_rule(&self) -> GradientRule {
        self.rule
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn n_filt(&self) -> usize {
        self.bank.n_filt()
    }

    /// Weight buffer for optimizers. Fails on a frozen layer.
    pub fn weights_mut(&mut self) -> Result<&mut [f64]> {
        if !self.trainable {
            return Err(Error::FrozenLayer);
        }
        Ok(self.bank.weights_mut().as_mut_slice())
    }

    /// Returns the n_filt × T log filter energies and the cache for backward.
    pub fn forward<'a>(&self, spec: &'a PowerSpectrogram) -> Result<(Matrix, FbLayerCache<'a>)> {
        let frames = spec.data();
        self.forward_frames(frames)
    }

    pub fn forward_frames<'a>(&self, frames: &'a Matrix) -> Result<(Matrix, FbLayerCache<'a>)> {
        let w = self.bank.weights();
        if frames.cols() != w.cols() {
            return Err(Error::invalid(format!(
                "spectrogram has {} bins, filter bank expects {}",
                frames.cols(),
                w.cols()
            )));
        }
        let (n_filt, t_len) = (w.rows(), frames.rows());
        let mut m = Matrix::zeros(n_filt, t_len);
        for i in 0..n_filt {
            let wi = w.row(i);
            for t in 0..t_len {
                let e: f64 = wi.iter().zip(frames.row(t)).map(|(a, b)| a * b).sum();
                m.set(i, t, e);
            }
        }
        let eps = self.epsilon;
        let features = Matrix::from_fn(n_filt, t_len, |i, t| (m.get(i, t).max(0.0) + eps).ln());
        Ok((features, FbLayerCache { m, frames }))
    }

    /// Gradients with respect to the weights (n_filt × n_bins) and the input
    /// frames (n_bins × T).
    pub fn backward(&self, grad_features: &Matrix, cache: &FbLayerCache<'_>) -> Result<(Matrix, Matrix)> {
        let w = self.bank.weights();
        let frames = cache.frames;
        let (n_filt, t_len) = cache.m.shape();
        if grad_features.shape() != (n_filt, t_len) || w.rows() != n_filt || frames.cols() != w.cols() {
            return Err(Error::invalid(format!(
                "gradient shape {:?} does not match cached forward pass {:?}",
                grad_features.shape(),
                (n_filt, t_len)
            )));
        }
        let grad_w = self.weight_gradient(grad_features, cache)?;
        let gate = self.local_gradient(&cache.m, grad_features);
        let mut grad_f = Matrix::zeros(w.cols(), t_len);
        for t in 0..t_len {
            for i in 0..n_filt {
                let d = gate.get(i, t);
                if d == 0.0 {
                    continue;
                }
                for (j, &wij) in w.row(i).iter().enumerate() {
                    let cell = grad_f.get(j, t);
                    grad_f.set(j, t, cell + d * wij);
                }
            }
        }
        Ok((grad_w, grad_f))
    }

    /// Weight gradient only; skips the input gradient.
    pub fn weight_gradient(&self, grad_features: &Matrix, cache: &FbLayerCache<'_>) -> Result<Matrix> {
        let (n_filt, t_len) = cache.m.shape();
        if grad_features.shape() != (n_filt, t_len) {
            return Err(Error::invalid("gradient shape does not match cached forward pass"));
        }
        let gate = self.local_gradient(&cache.m, grad_features);
        let mut grad_w = Matrix::zeros(n_filt, self.bank.n_bins());
        for i in 0..n_filt {
            let gw = grad_w.row_mut(i);
            for t in 0..t_len {
                let d = gate.get(i, t);
                if d == 0.0 {
                    continue;
                }
                for (g, &f) in gw.iter_mut().zip(cache.frames.row(t)) {
                    *g += d * f;
                }
            }
        }
        Ok(grad_w)
    }

    // grad_features[i,t] · ∂l/∂m at m[i,t]
    fn local_gradient(&self, m: &Matrix, grad_features: &Matrix) -> Matrix {
        let eps = self.epsilon;
        let rule = self.rule;
        Matrix::from_fn(m.rows(), m.cols(), |i, t| {
            let mv = m.get(i, t);
            if mv > 0.0 {
                let scale = match rule {
                    GradientRule::Exact => 1.0 / (mv + eps),
                    GradientRule::Unscaled => 1.0,
                };
                grad_features.get(i, t) * scale
            } else {
                0.0
            }
        })
    }

    /// Plain gradient step `W ← W − α·∇W`.
    pub fn sgd_update(&self, grad_w: &Matrix, alpha: f64) -> Result<FbLayer> {
        if !self.trainable {
            return Err(Error::FrozenLayer);
        }
        if grad_w.shape() != self.bank.weights().shape() {
            return Err(Error::invalid("gradient shape does not match weights"));
        }
        let mut next = self.clone();
        for (w, g) in next.bank.weights_mut().as_mut_slice().iter_mut().zip(grad_w.as_slice()) {
            *w -= alpha * g;
        }
        Ok(next)
    }

    /// Copy of the current bank tagged with `provenance`.
    pub fn export_bank(&self, provenance: Provenance) -> FilterBank {
        self.bank
            .with_weights(self.bank.weights().clone(), provenance)
            .expect("same shape")
    }
}
