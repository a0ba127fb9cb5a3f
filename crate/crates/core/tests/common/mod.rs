//! Oracles shared by the integration tests.

use std::f64::consts::PI;

/// Log-mel features coded from the definitions: HTK mel edges, triangles
/// linear in Hz with unit peak, Hann window, direct DFT, `ln(e + 1e-10)`.
/// Returns one row per frame.
pub fn oracle_log_mel(samples: &[f64], rate: u32, nfft: usize, hop: usize, n_filt: usize) -> Vec<Vec<f64>> {
    let mel = |f: f64| 1127.0 * (1.0 + f / 700.0).ln();
    let inv_mel = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
    let nyq = rate as f64 / 2.0;
    let (m_lo, m_hi) = (mel(0.0), mel(nyq));
    let edges: Vec<f64> = (0..n_filt + 2)
        .map(|k| match k {
            0 => 0.0,
            k if k == n_filt + 1 => nyq,
            k => inv_mel(m_lo + (m_hi - m_lo) * k as f64 / (n_filt + 1) as f64),
        })
        .collect();
    let n_bins = nfft / 2 + 1;
    let bin_hz = |k: usize| k as f64 * rate as f64 / nfft as f64;
    let filters: Vec<Vec<f64>> = (0..n_filt)
        .map(|i| {
            let (a, c, b) = (edges[i], edges[i + 1], edges[i + 2]);
            let raw: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f > a && f <= c {
                        (f - a) / (c - a)
                    } else if f > c && f < b {
                        (b - f) / (b - c)
                    } else {
                        0.0
                    }
                })
                .collect();
            let peak = raw.iter().cloned().fold(0.0, f64::max);
            raw.into_iter().map(|v| v / peak).collect()
        })
        .collect();
    let window: Vec<f64> = (0..nfft).map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (nfft - 1) as f64).cos())).collect();
    let n_frames = (samples.len() - nfft) / hop + 1;
    (0..n_frames)
        .map(|t| {
            let frame: Vec<f64> = (0..nfft).map(|n| samples[t * hop + n] * window[n]).collect();
            let power: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, x) in frame.iter().enumerate() {
                        let ang = -2.0 * PI * (k * n % nfft) as f64 / nfft as f64;
                        re += x * ang.cos();
                        im += x * ang.sin();
                    }
                    re * re + im * im
                })
                .collect();
            filters
                .iter()
                .map(|f| (f.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>().max(0.0) + 1e-10).ln())
                .collect()
        })
        .collect()
}
