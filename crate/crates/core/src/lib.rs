//! Learnable audio filter banks.
//!
//! A filter bank layer computes `ln(relu(W f_t) + ε)` over power spectrum
//! frames `f_t`. It is initialized from triangular mel filters, trained
//! jointly with a small CNN, smoothed with a Savitzky-Golay filter and used
//! to re-initialize the layer for another training round.
//!
//! Modules:
//!
//! - [`dsp`]: waveforms, windows, power spectrograms, resampling, clip splitting
//! - [`melbank`]: mel scale, triangular filter banks, filter bank CSV files
//! - [`fblayer`]: the trainable filter bank layer (forward, backward, update)
//! - [`nn`]: convolution, pooling, dense layers, Adam, learning rate schedule
//! - [`smoothing`]: Savitzky-Golay kernels and filter bank smoothing
//! - [`egl`]: the train / smooth / re-initialize loop and majority voting
//! - [`data`]: WAV I/O, fold manifests, synthetic band dataset
//! - [`report`]: accuracy, confusion matrices, SVG filter plots
//! - [`cli`]: the `fbank-egl` command line

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod dsp;
pub mod egl;
pub mod error;
pub mod fblayer;
pub mod matrix;
pub mod melbank;
pub mod nn;
pub mod report;
pub mod smoothing;

pub use error::{Error, Result};
pub use matrix::Matrix;
