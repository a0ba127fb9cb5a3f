//! 22.05 kHz to 8 kHz resampling keeps an in-band tone.

use fbank_egl::dsp::{dft_power, resample, Waveform};

fn main() -> fbank_egl::Result<()> {
    let src = 22050;
    let samples: Vec<f64> = (0..src).map(|n| (std::f64::consts::TAU * 1000.0 * n as f64 / src as f64).sin()).collect();
    let down = resample(&Waveform::new(samples, src as u32)?, 8000)?;
    let power = dft_power(&down.samples()[..8000])?;
    let peak = (0..power.len()).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap_or(0);
    println!("{} -> {} samples, spectral peak at {} Hz", src, down.len(), peak);
    Ok(())
}
