//! A frozen filter bank layer with triangular weights is a log-mel extractor.

use fbank_egl::dsp::{power_spectrogram, FrameSpec, Waveform};
use fbank_egl::fblayer::{FbLayer, DEFAULT_EPSILON};
use fbank_egl::melbank::triangular_filterbank;

fn main() -> fbank_egl::Result<()> {
    let rate = 8000;
    // 440 Hz plus a quieter 2 kHz partial
    let samples: Vec<f64> = (0..rate)
        .map(|n| {
            let t = n as f64 / rate as f64;
            (std::f64::consts::TAU * 440.0 * t).sin() + 0.3 * (std::f64::consts::TAU * 2000.0 * t).sin()
        })
        .collect();
    let wave = Waveform::new(samples, rate as u32)?;

    let spec = FrameSpec::with_default_hop(512)?;
    let power = power_spectrogram(&wave, spec)?;
    let bank = triangular_filterbank(24, spec.nfft, wave.sample_rate_hz(), 0.0, 4000.0)?;
    let layer = FbLayer::new(bank, DEFAULT_EPSILON, false)?;
    let (features, _) = layer.forward(&power)?;

    println!("{} frames x {} bins -> {} filters", power.n_frames(), power.n_bins(), features.rows());
    let peaks = layer.bank().peak_bins();
    for (i, peak) in peaks.iter().enumerate() {
        let mean = features.row(i).iter().sum::<f64>() / features.cols() as f64;
        let bar = "#".repeat(((mean + 25.0).max(0.0) * 1.5) as usize);
        println!("{:>7.0} Hz {:>8.2} {bar}", layer.bank().bin_hz(*peak), mean);
    }
    Ok(())
}
