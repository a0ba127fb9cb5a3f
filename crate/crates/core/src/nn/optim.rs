//! Adam and the step-decay learning rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moment estimates for a list of parameter buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Default hyperparameters (0.9, 0.999, 1e-8), zero moments.
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam: {} parameter buffers, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::invalid("adam: parameter and gradient sizes differ"));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub base_lr: f64,
    pub decay_rate: f64,
    pub decay_every_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            base_lr: 0.001,
            decay_rate: 0.006,
            decay_every_epochs: 3,
            epochs: 30,
            batch_size: 16,
            rng_seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) {
            return Err(Error::invalid("base_lr must be > 0"));
        }
        if !(self.decay_rate >= 0.0) {
            return Err(Error::invalid("decay_rate must be >= 0"));
        }
        if self.decay_every_epochs == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "decay_every_epochs, epochs and batch_size must be positive",
            ));
        }
        Ok(())
    }
}

/// `base_lr / (1 + decay_rate · e)` where `e` is `epoch` rounded down to a
/// multiple of `decay_every_epochs`. Not compounding.
pub fn scheduled_lr(sched: &TrainSchedule, epoch: usize) -> f64 {
    let every = sched.decay_every_epochs.max(1);
    let e = (epoch / every) * every;
    sched.base_lr / (1.0 + sched.decay_rate * e as f64)
}
