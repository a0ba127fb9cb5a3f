//! Waveforms, framing, power spectra, rate conversion and clip splitting.
//!
//! A [`PowerSpectrogram`] stores one frame per row: row `t` is the power
//! spectrum `f_t` that the filter bank layer consumes.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn fit_to_len(&self, len: usize) -> Waveform {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Waveform {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

/// Analysis framing: frame length (`nfft`), hop and window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub nfft: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl FrameSpec {
    pub fn new(nfft: usize, hop: usize, window: WindowKind) -> Result<Self> {
        if nfft < 2 {
            return Err(Error::invalid(format!("nfft must be >= 2, got {nfft}")));
        }
        if hop == 0 {
            return Err(Error::invalid("hop must be >= 1"));
        }
        Ok(Self { nfft, hop, window })
    }

    /// Hann window with hop `nfft / 4`.
    pub fn with_default_hop(nfft: usize) -> Result<Self> {
        Self::new(nfft, (nfft / 4).max(1), WindowKind::Hann)
    }

    pub fn n_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    /// Number of full frames that fit in `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.nfft {
            0
        } else {
            (len - self.nfft) / self.hop + 1
        }
    }
}

/// Frames × bins matrix of nonnegative spectral power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    data: Matrix,
    frame_spec: FrameSpec,
    sample_rate_hz: u32,
}

impl PowerSpectrogram {
    /// Wraps precomputed power frames (one frame per row).
    pub fn from_frames(data: Matrix, frame_spec: FrameSpec, sample_rate_hz: u32) -> Result<Self> {
        if data.cols() != frame_spec.n_bins() {
            return Err(Error::invalid(format!(
                "frame width {} does not match nfft/2+1 = {}",
                data.cols(),
                frame_spec.n_bins()
            )));
        }
        if data.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("power values must be finite and nonnegative"));
        }
        Ok(Self {
            data,
            frame_spec,
            sample_rate_hz,
        })
    }

    /// T × B power matrix; row `t` is frame `t`.
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.data.row(t)
    }

    pub fn n_frames(&self) -> usize {
        self.data.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.data.cols()
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frame_spec
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate_hz) / self.frame_spec.nfft as f64
    }
}

pub fn window_coefficients(kind: WindowKind, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("window length must be >= 1"));
    }
    Ok(match kind {
        WindowKind::Rectangular => vec![1.0; n],
        WindowKind::Hann if n == 1 => vec![1.0],
        WindowKind::Hann => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / denom).cos())
                .collect()
        }
    })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `|DFT(frame)[k]|²` for `k = 0..=n/2`, exact for any length `n >= 2`.
pub fn dft_power(frame: &[f64]) -> Result<Vec<f64>> {
    let n = frame.len();
    if n < 2 {
        return Err(Error::invalid(format!("frame length must be >= 2, got {n}")));
    }
    if frame.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("frame contains non-finite values"));
    }
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    Ok(buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
}

pub fn power_spectrogram(w: &Waveform, spec: FrameSpec) -> Result<PowerSpectrogram> {
    let len = w.len();
    if len < spec.nfft {
        return Err(Error::invalid(format!(
            "waveform has {len} samples, fewer than nfft = {}",
            spec.nfft
        )));
    }
    let window = window_coefficients(spec.window, spec.nfft)?;
    let n_frames = spec.n_frames(len);
    let n_bins = spec.n_bins();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(spec.nfft));
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); spec.nfft];
    let mut data = Matrix::zeros(n_frames, n_bins);
    for t in 0..n_frames {
        let start = t * spec.hop;
        let frame = &w.samples()[start..start + spec.nfft];
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample in frame {t}")));
        }
        for ((b, &x), &g) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex::new(x * g, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (out, c) in data.row_mut(t).iter_mut().zip(&buf[..n_bins]) {
            *out = c.norm_sqr();
        }
    }
    Ok(PowerSpectrogram {
        data,
        frame_spec: spec,
        sample_rate_hz: w.sample_rate_hz(),
    })
}

const RESAMPLE_TAPS: usize = 32;
const RESAMPLE_KAISER_BETA: f64 = 8.6;
// Above this many phases the kernel is evaluated per output sample.
const MAX_TABLE_PHASES: u64 = 4096;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Kernel taps for one fractional offset, normalized to unit DC gain.
fn resample_taps(frac: f64, cutoff: f64) -> [f64; RESAMPLE_TAPS] {
    let half = (RESAMPLE_TAPS / 2) as f64;
    let norm = bessel_i0(RESAMPLE_KAISER_BETA);
    let mut taps = [0.0; RESAMPLE_TAPS];
    for (k, tap) in taps.iter_mut().enumerate() {
        // tap k sits at source offset (k - half + 1) relative to the base index
        let x = (k as f64 - half + 1.0) - frac;
        let r = x / half;
        let kaiser = if r.abs() >= 1.0 {
            0.0
        } else {
            bessel_i0(RESAMPLE_KAISER_BETA * (1.0 - r * r).sqrt()) / norm
        };
        *tap = cutoff * sinc(cutoff * x) * kaiser;
    }
    let sum: f64 = taps.iter().sum();
    if sum.abs() > 0.0 {
        taps.iter_mut().for_each(|t| *t /= sum);
    }
    taps
}

/// Band-limited rate conversion with a Kaiser-windowed sinc kernel
/// (beta 8.6, 32 taps per phase).
pub fn resample(w: &Waveform, target_rate_hz: u32) -> Result<Waveform> {
    if target_rate_hz == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let src = u64::from(w.sample_rate_hz());
    let dst = u64::from(target_rate_hz);
    if src == dst {
        return Ok(w.clone());
    }
    let g = gcd(src, dst);
    let (up, down) = (dst / g, src / g);
    let out_len = ((w.len() as f64) * dst as f64 / src as f64).round() as usize;
    let cutoff = (dst as f64 / src as f64).min(1.0);
    let table: Option<Vec<[f64; RESAMPLE_TAPS]>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| resample_taps(p as f64 / up as f64, cutoff))
            .collect()
    });
    let x = w.samples();
    let half = (RESAMPLE_TAPS / 2) as i64;
    let out = (0..out_len)
        .map(|n| {
            let pos = n as u64 * down;
            let base = (pos / up) as i64;
            let phase = pos % up;
            let computed;
            let taps = match &table {
                Some(t) => &t[phase as usize],
                None => {
                    computed = resample_taps(phase as f64 / up as f64, cutoff);
                    &computed
                }
            };
            taps.iter()
                .enumerate()
                .map(|(k, &h)| {
                    let idx = base + k as i64 - half + 1;
                    if idx < 0 || idx as usize >= x.len() {
                        0.0
                    } else {
                        h * x[idx as usize]
                    }
                })
                .sum()
        })
        .collect();
    Waveform::new(out, target_rate_hz)
}

/// Splits into consecutive non-overlapping segments of
/// `floor(segment_seconds * rate)` samples. A trailing partial segment is
/// zero-padded when it covers at least half a segment, dropped otherwise.
pub fn split_clip(w: &Waveform, segment_seconds: f64) -> Result<Vec<Waveform>> {
    if !(segment_seconds > 0.0) || !segment_seconds.is_finite() {
        return Err(Error::invalid("segment length must be positive"));
    }
    let seg = (segment_seconds * f64::from(w.sample_rate_hz())).floor() as usize;
    if seg == 0 {
        return Err(Error::invalid("segment is shorter than one sample"));
    }
    let mut out = Vec::with_capacity(w.len() / seg + 1);
    for chunk in w.samples().chunks(seg) {
        if chunk.len() == seg {
            out.push(Waveform::new(chunk.to_vec(), w.sample_rate_hz())?);
        } else if 2 * chunk.len() >= seg {
            let mut padded = chunk.to_vec();
            padded.resize(seg, 0.0);
            out.push(Waveform::new(padded, w.sample_rate_hz())?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct_dft_power(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * j % n) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn window_examples() {
        assert_eq!(window_coefficients(WindowKind::Rectangular, 4).unwrap(), vec![1.0; 4]);
        let h3 = window_coefficients(WindowKind::Hann, 3).unwrap();
        for (a, b) in h3.iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let h5 = window_coefficients(WindowKind::Hann, 5).unwrap();
        for (a, b) in h5.iter().zip([0.0, 0.5, 1.0, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(window_coefficients(WindowKind::Hann, 0).is_err());
    }

    #[test]
    fn dft_power_zero_and_cosine() {
        assert_eq!(dft_power(&[0.0; 8]).unwrap(), vec![0.0; 5]);
        let frame: Vec<f64> = (0..8).map(|k| (2.0 * PI * 2.0 * k as f64 / 8.0).cos()).collect();
        let p = dft_power(&frame).unwrap();
        for (k, v) in p.iter().enumerate() {
            let want = if k == 2 { 16.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "bin {k}: {v}");
        }
    }

    #[test]
    fn dft_power_matches_direct_summation() {
        let mut seed = 42;
        for n in [7usize, 8, 12, 100] {
            let x: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
            let fast = dft_power(&x).unwrap();
            let slow = direct_dft_power(&x);
            let scale = slow.iter().cloned().fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9 * scale.max(1.0), "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dft_power_rejects_bad_input() {
        assert!(matches!(dft_power(&[1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(dft_power(&[1.0, f64::NAN]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spectrogram_frame_count_and_silence() {
        let spec = FrameSpec::new(400, 100, WindowKind::Hann).unwrap();
        let w = Waveform::new(vec![0.1; 1000], 8000).unwrap();
        assert_eq!(power_spectrogram(&w, spec).unwrap().n_frames(), 7);

        let spec = FrameSpec::new(64, 64, WindowKind::Hann).unwrap();
        let w = Waveform::new(vec![0.0; 128], 8000).unwrap();
        let s = power_spectrogram(&w, spec).unwrap();
        assert_eq!(s.n_frames(), 2);
        assert!(s.data().as_slice().iter().all(|&v| v == 0.0));

        let short = Waveform::new(vec![0.0; 63], 8000).unwrap();
        assert!(power_spectrogram(&short, spec).is_err());
    }

    #[test]
    fn bin_centered_tone_has_single_dominant_bin() {
        let nfft = 64;
        let spec = FrameSpec::new(nfft, 16, WindowKind::Rectangular).unwrap();
        let samples: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * 5.0 * k as f64 / nfft as f64).sin())
            .collect();
        let w = Waveform::new(samples.clone(), 8000).unwrap();
        let s = power_spectrogram(&w, spec).unwrap();
        for t in 0..s.n_frames() {
            let oracle = direct_dft_power(&samples[t * 16..t * 16 + nfft]);
            let row = s.frame(t);
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, 5);
            for (a, b) in row.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn resample_identity_and_dc() {
        let w = Waveform::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
        assert_eq!(resample(&w, 16000).unwrap(), w);

        let w = Waveform::new(vec![0.37; 16000], 16000).unwrap();
        let r = resample(&w, 8000).unwrap();
        assert_eq!(r.len(), 8000);
        assert_eq!(r.sample_rate_hz(), 8000);
        for &v in &r.samples()[32..r.len() - 32] {
            assert!((v - 0.37).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn resample_keeps_tone_frequency() {
        let src = 44100u32;
        let samples: Vec<f64> = (0..src)
            .map(|k| 0.5 * (2.0 * PI * 1000.0 * k as f64 / f64::from(src)).sin())
            .collect();
        let w = Waveform::new(samples, src).unwrap();
        let r = resample(&w, 8000).unwrap();
        assert_eq!(r.len(), 8000);
        let spec = FrameSpec::new(8000, 2000, WindowKind::Hann).unwrap();
        let s = power_spectrogram(&r, spec).unwrap();
        let peak = s
            .frame(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((s.bin_hz(peak) - 1000.0).abs() <= 1.0);
    }

    #[test]
    fn resample_rejects_zero_rate() {
        let w = Waveform::new(vec![0.0; 4], 8000).unwrap();
        assert!(resample(&w, 0).is_err());
    }

    #[test]
    fn split_examples() {
        let w = Waveform::new(vec![0.5; 32000], 8000).unwrap();
        let segs = split_clip(&w, 1.0).unwrap();
        assert_eq!(segs.len(), 4);
        assert!(segs.iter().all(|s| s.len() == 8000));

        let w = Waveform::new((0..8000).map(f64::from).collect(), 8000).unwrap();
        assert_eq!(split_clip(&w, 1.0).unwrap(), vec![w.clone()]);

        let w = Waveform::new(vec![1.0; 20800], 8000).unwrap();
        let segs = split_clip(&w, 1.0).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(segs[2].samples()[..4800].iter().all(|&v| v == 1.0));
        assert!(segs[2].samples()[4800..].iter().all(|&v| v == 0.0));

        let w = Waveform::new(vec![1.0; 19000], 8000).unwrap();
        assert_eq!(split_clip(&w, 1.0).unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn parseval_holds(frame in prop::collection::vec(-1.0f64..1.0, 2..96)) {
            let n = frame.len();
            let p = dft_power(&frame).unwrap();
            let mut total = 0.0;
            for (k, v) in p.iter().enumerate() {
                let mirrored = k != 0 && !(n % 2 == 0 && k == n / 2);
                total += if mirrored { 2.0 * v } else { *v };
            }
            let energy: f64 = n as f64 * frame.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((total - energy).abs() <= 1e-6 * energy.max(1e-12));
        }

        #[test]
        fn spectrogram_is_nonnegative(samples in prop::collection::vec(-1.0f64..1.0, 32..200)) {
            let w = Waveform::new(samples, 8000).unwrap();
            let s = power_spectrogram(&w, FrameSpec::new(32, 8, WindowKind::Hann).unwrap()).unwrap();
            prop_assert!(s.data().as_slice().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn split_reproduces_prefix(len in 1usize..5000, seg_ms in 50u32..1500) {
            let samples: Vec<f64> = (0..len).map(|k| k as f64).collect();
            let w = Waveform::new(samples.clone(), 1000).unwrap();
            let segs = split_clip(&w, f64::from(seg_ms) / 1000.0).unwrap();
            let joined: Vec<f64> = segs.iter().flat_map(|s| s.samples().iter().copied()).collect();
            let kept = joined.len().min(len);
            prop_assert_eq!(&joined[..kept], &samples[..kept]);
            prop_assert!(joined[kept..].iter().all(|&v| v == 0.0));
        }
    }
}
