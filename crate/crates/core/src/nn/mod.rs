//! A small CNN stack with manual backpropagation.

mod layers;
mod model;
mod optim;
mod tensor;
mod train;

pub use layers::{
    leaky_relu, leaky_relu_backward, leaky_relu_forward, maxpool_backward, maxpool_forward, softmax,
    softmax_xent, Conv2d, ConvGrads, Dense, DenseGrads,
};
pub use model::{Architecture, Checkpoint, Layer, Model, ModelConfig, Trace, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::{adam_step, scheduled_lr, AdamState, TrainSchedule};
pub use tensor::Tensor3;
pub use train::{
    argmax, evaluate, features_tensor, predict_scores, train_model, EpochStats, LabeledSpectrogram, TrainOutcome,
};
