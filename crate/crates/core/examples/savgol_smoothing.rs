//! Savitzky-Golay kernels and smoothing a noisy filter bank.

use fbank_egl::melbank::{triangular_filterbank, Provenance};
use fbank_egl::smoothing::{savgol_kernel, smooth_filterbank, total_variation, SavGolSpec};
use fbank_egl::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fbank_egl::Result<()> {
    let k = savgol_kernel(&SavGolSpec::new(5, 2)?)?;
    let times35: Vec<String> = k.iter().map(|c| format!("{:.3}", c * 35.0)).collect();
    println!("window 5, order 2, x35: [{}]", times35.join(", "));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tri = triangular_filterbank(8, 256, 8000, 0.0, 4000.0)?;
    let noisy = Matrix::from_fn(tri.n_filt(), tri.n_bins(), |i, j| tri.weights().get(i, j) + rng.random_range(-0.05..0.05));
    let noisy = tri.with_weights(noisy, Provenance::Trained)?;
    let smooth = smooth_filterbank(&noisy, &SavGolSpec::default())?;
    for i in 0..tri.n_filt() {
        println!(
            "filter {i}: total variation {:.3} -> {:.3}",
            total_variation(noisy.weights().row(i)),
            total_variation(smooth.weights().row(i))
        );
    }
    Ok(())
}
