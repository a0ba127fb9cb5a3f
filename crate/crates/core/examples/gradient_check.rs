//! Analytic filter bank gradients against central differences.

use fbank_egl::fblayer::{FbLayer, GradientRule};
use fbank_egl::melbank::{FilterBank, Provenance};
use fbank_egl::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(layer: &FbLayer, frames: &Matrix, g: &Matrix) -> f64 {
    let (l, _) = layer.forward_frames(frames).unwrap();
    l.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
}

fn main() -> fbank_egl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (n_filt, n_bins, frames_len) = (4, 9, 5);
    let w = Matrix::from_fn(n_filt, n_bins, |_, _| rng.random_range(0.0..1.0));
    let frames = Matrix::from_fn(frames_len, n_bins, |_, _| rng.random_range(0.1..1.0));
    let g = Matrix::from_fn(n_filt, frames_len, |_, _| rng.random_range(-1.0..1.0));
    let bank = FilterBank::new(w.clone(), 2 * (n_bins - 1), 8000, Provenance::Trained)?;

    for rule in [GradientRule::Exact, GradientRule::Unscaled] {
        let layer = FbLayer::new(bank.clone(), 1e-10, true)?.with_gradient_rule(rule);
        let (_, cache) = layer.forward_frames(&frames)?;
        let grad = layer.weight_gradient(&g, &cache)?;
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..n_filt {
            for j in 0..n_bins {
                let probe = |d: f64| {
                    let mut wd = w.clone();
                    wd.set(i, j, w.get(i, j) + d);
                    loss(&FbLayer::new(bank.with_weights(wd, Provenance::Trained).unwrap(), 1e-10, true).unwrap(), &frames, &g)
                };
                let num = (probe(h) - probe(-h)) / (2.0 * h);
                worst = worst.max((grad.get(i, j) - num).abs() / num.abs().max(1e-6));
            }
        }
        println!("{rule:?}: worst relative error vs finite differences {worst:.2e}");
    }
    Ok(())
}
