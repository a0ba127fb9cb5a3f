//! Mini-batch training of the filter bank layer and classifier together.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::softmax_xent;
use super::model::Model;
use super::optim::{adam_step, scheduled_lr, AdamState, TrainSchedule};
use super::tensor::Tensor3;
use crate::dsp::PowerSpectrogram;
use crate::error::{Error, Result};
use crate::fblayer::FbLayer;
use crate::matrix::Matrix;

/// One training or evaluation example.
#[derive(Debug, Clone)]
pub struct LabeledSpectrogram {
    pub spectrogram: PowerSpectrogram,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub fb: FbLayer,
    pub history: Vec<EpochStats>,
    pub model_adam: AdamState,
    pub fb_adam: Option<AdamState>,
}

/// Filter bank features as a 1 × n_filt × T tensor.
pub fn features_tensor(features: Matrix) -> Tensor3 {
    let (h, w) = features.shape();
    Tensor3::from_vec(1, h, w, features.into_vec())
}

/// Class scores (softmax probabilities) for one spectrogram.
pub fn predict_scores(model: &Model, fb: &FbLayer, spec: &PowerSpectrogram) -> Result<Vec<f64>> {
    let (features, _) = fb.forward(spec)?;
    model.predict_proba(&features_tensor(features))
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

pub fn evaluate(model: &Model, fb: &FbLayer, data: &[LabeledSpectrogram]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let correct = data
        .par_iter()
        .map(|ex| Ok(usize::from(argmax(&predict_scores(model, fb, &ex.spectrogram)?) == ex.label)))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

struct ExampleGrad {
    loss: f64,
    correct: bool,
    model: Vec<Vec<f64>>,
    fb: Option<Matrix>,
}

fn example_gradient(model: &Model, fb: &FbLayer, ex: &LabeledSpectrogram) -> Result<ExampleGrad> {
    let (features, cache) = fb.forward(&ex.spectrogram)?;
    let (logits, trace) = model.forward_trace(&features_tensor(features))?;
    let (loss, grad_logits) = softmax_xent(&logits, ex.label)?;
    let (grad_in, model_grads) = model.backward(&trace, &grad_logits)?;
    let fb_grad = if fb.is_trainable() {
        let g = Matrix::from_vec(grad_in.h, grad_in.w, grad_in.data);
        Some(fb.weight_gradient(&g, &cache)?)
    } else {
        None
    };
    Ok(ExampleGrad {
        loss,
        correct: argmax(&logits) == ex.label,
        model: model_grads,
        fb: fb_grad,
    })
}

/// Trains `model` and, when trainable, `fb` with Adam on shuffled
/// mini-batches. Per-example gradients are computed in parallel and summed
/// in batch order, so results do not depend on the thread count.
pub fn train_model(
    mut model: Model,
    mut fb: FbLayer,
    train: &[LabeledSpectrogram],
    val: &[LabeledSpectrogram],
    sched: &TrainSchedule,
) -> Result<TrainOutcome> {
    sched.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sched.rng_seed);
    let mut model_adam = AdamState::new(model.param_sizes());
    let mut fb_adam = fb.is_trainable().then(|| AdamState::new([fb.weights().as_slice().len()]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(sched.epochs);

    for epoch in 0..sched.epochs {
        let lr = scheduled_lr(sched, epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(sched.batch_size) {
            let grads = batch
                .par_iter()
                .map(|&i| example_gradient(&model, &fb, &train[i]))
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut model_sum: Vec<Vec<f64>> = model.param_sizes().into_iter().map(|n| vec![0.0; n]).collect();
            let mut fb_sum = fb.is_trainable().then(|| vec![0.0; fb.weights().as_slice().len()]);
            for g in &grads {
                loss_sum += g.loss;
                correct += usize::from(g.correct);
                for (acc, part) in model_sum.iter_mut().zip(&g.model) {
                    acc.iter_mut().zip(part).for_each(|(a, p)| *a += p * scale);
                }
                if let (Some(acc), Some(part)) = (fb_sum.as_mut(), g.fb.as_ref()) {
                    acc.iter_mut().zip(part.as_slice()).for_each(|(a, p)| *a += p * scale);
                }
            }
            if !loss_sum.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            let grad_refs: Vec<&[f64]> = model_sum.iter().map(Vec::as_slice).collect();
            adam_step(&mut model.params_mut(), &grad_refs, &mut model_adam, lr)?;
            if let (Some(state), Some(g)) = (fb_adam.as_mut(), fb_sum.as_ref()) {
                adam_step(&mut [fb.weights_mut()?], &[g.as_slice()], state, lr)?;
                if fb.weights().as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(Error::TrainingDiverged { epoch });
                }
            }
        }
        let val_accuracy = if val.is_empty() {
            None
        } else {
            Some(evaluate(&model, &fb, val)?)
        };
        history.push(EpochStats {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_accuracy,
        });
    }
    Ok(TrainOutcome {
        model,
        fb,
        history,
        model_adam,
        fb_adam,
    })
}
