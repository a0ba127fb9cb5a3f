//! WAV files, fold manifests and the synthetic band dataset.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// One labeled clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipExample {
    pub waveform: Waveform,
    pub label: usize,
    pub fold: u32,
    pub id: String,
}

// ---------------------------------------------------------------- WAV

const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 3;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn wav_err(offset: usize, message: impl Into<String>) -> Error {
    Error::WavParse {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> Result<u16> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| wav_err(at, "unexpected end of file"))
}

fn u32_at(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| wav_err(at, "unexpected end of file"))
}

/// Decodes a RIFF/WAVE byte buffer (PCM16 or float32, any channel count)
/// into mono by averaging channels.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(wav_err(0, "missing RIFF tag"));
    }
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(wav_err(8, "missing WAVE tag"));
    }
    let mut at = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4)? as usize;
        let body = at + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| wav_err(at + 4, format!("chunk '{}' runs past end of file", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(at + 4, "fmt chunk shorter than 16 bytes"));
                }
                let mut tag = u16_at(bytes, body)?;
                let channels = u16_at(bytes, body + 2)?;
                let rate = u32_at(bytes, body + 4)?;
                let bits = u16_at(bytes, body + 14)?;
                if tag == WAVE_FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(wav_err(at + 4, "extensible fmt chunk shorter than 40 bytes"));
                    }
                    tag = u16_at(bytes, body + 24)?;
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(&bytes[body..end]),
            _ => {}
        }
        at = end + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| wav_err(12, "no fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(12, "no data chunk"))?;
    if channels == 0 {
        return Err(wav_err(22, "zero channels"));
    }
    if rate == 0 {
        return Err(wav_err(24, "zero sample rate"));
    }
    let decode: fn(&[u8]) -> f64 = match (tag, bits) {
        (WAVE_FORMAT_PCM, 16) => |s| f64::from(i16::from_le_bytes([s[0], s[1]])) / 32768.0,
        (WAVE_FORMAT_IEEE_FLOAT, 32) => |s| f64::from(f32::from_le_bytes([s[0], s[1], s[2], s[3]])),
        (t, b) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {t} with {b} bits per sample (need PCM16 or float32)"
            )))
        }
    };
    let width = usize::from(bits / 8);
    let frame = width * usize::from(channels);
    if data.len() % frame != 0 {
        return Err(wav_err(
            at.min(bytes.len()),
            format!("data length {} is not a multiple of the frame size {frame}", data.len()),
        ));
    }
    let samples = data
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(width).map(decode).sum::<f64>() / f64::from(channels))
        .collect();
    Waveform::new(samples, rate)
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_wav(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// Encodes interleaved samples as a RIFF/WAVE buffer.
pub fn encode_wav(interleaved: &[f64], channels: u16, sample_rate_hz: u32, format: SampleFormat) -> Vec<u8> {
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (WAVE_FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (WAVE_FORMAT_IEEE_FLOAT, 32u16),
    };
    let block = channels * bits / 8;
    let data_len = interleaved.len() * usize::from(bits / 8);
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * u32::from(block)).to_le_bytes());
    out.extend_from_slice(&block.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in interleaved {
        match format {
            SampleFormat::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(path: &Path, w: &Waveform, format: SampleFormat) -> Result<()> {
    let bytes = encode_wav(w.samples(), 1, w.sample_rate_hz(), format);
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

// ---------------------------------------------------------------- manifests

pub const DEFAULT_N_FOLDS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file_name: String,
    pub fold: u32,
    pub class_id: usize,
    pub class_name: String,
}

/// Labeled file list in the `slice_file_name,fold,classID,class` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub n_folds: u32,
}

impl DatasetManifest {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Location of an entry's audio. Tries `root/file`, then the
    /// UrbanSound8K layouts `root/foldN/file`, `root/audio/foldN/file` and
    /// `root/../audio/foldN/file`.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let fold_dir = format!("fold{}", entry.fold);
        let candidates = [
            self.root.join(&entry.file_name),
            self.root.join(&fold_dir).join(&entry.file_name),
            self.root.join("audio").join(&fold_dir).join(&entry.file_name),
            self.root.join("..").join("audio").join(&fold_dir).join(&entry.file_name),
        ];
        candidates
            .iter()
            .find(|p| p.is_file())
            .cloned()
            .unwrap_or_else(|| candidates[0].clone())
    }

    /// Reads every entry's audio in manifest order.
    pub fn load_clips(&self, entries: &[ManifestEntry]) -> Result<Vec<ClipExample>> {
        entries
            .iter()
            .map(|e| {
                Ok(ClipExample {
                    waveform: read_wav(&self.resolve(e))?,
                    label: e.class_id,
                    fold: e.fold,
                    id: e.file_name.clone(),
                })
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("slice_file_name,fold,classID,class\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.file_name, e.fold, e.class_id, e.class_name));
        }
        out
    }
}

pub fn load_manifest(csv_path: &Path) -> Result<DatasetManifest> {
    load_manifest_with_folds(csv_path, DEFAULT_N_FOLDS)
}

pub fn load_manifest_with_folds(csv_path: &Path, n_folds: u32) -> Result<DatasetManifest> {
    let text =
        fs::read_to_string(csv_path).map_err(|e| Error::io(format!("reading {}", csv_path.display()), e))?;
    let perr = |line: u64, message: String| Error::Parse {
        path: csv_path.to_path_buf(),
        line,
        message,
    };
    if text.trim().is_empty() {
        return Err(perr(1, "empty manifest".into()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_file), Some(c_fold), Some(c_id)) = (col("slice_file_name"), col("fold"), col("classID")) else {
        return Err(perr(
            1,
            "header must contain slice_file_name, fold and classID columns".into(),
        ));
    };
    let c_name = col("class");

    let mut entries = Vec::new();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut duplicates = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            perr(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| rec.get(c).unwrap_or("");
        let file_name = field(c_file).to_string();
        if file_name.is_empty() {
            return Err(perr(line, "empty slice_file_name".into()));
        }
        let fold: u32 = field(c_fold)
            .parse()
            .map_err(|_| perr(line, format!("bad fold '{}'", field(c_fold))))?;
        if fold == 0 || fold > n_folds {
            return Err(perr(line, format!("unknown fold {fold} (expected 1..={n_folds})")));
        }
        let class_id: usize = field(c_id)
            .parse()
            .map_err(|_| perr(line, format!("bad classID '{}'", field(c_id))))?;
        let class_name = c_name.map_or_else(|| format!("class_{class_id}"), |c| field(c).to_string());
        match names.get(&class_id) {
            Some(existing) if *existing != class_name => {
                return Err(perr(
                    line,
                    format!("classID {class_id} named both '{existing}' and '{class_name}'"),
                ))
            }
            _ => {
                names.insert(class_id, class_name.clone());
            }
        }
        if let Some(first) = seen.insert(file_name.clone(), line) {
            duplicates.push(format!("{file_name} (lines {first} and {line})"));
        }
        entries.push(ManifestEntry {
            file_name,
            fold,
            class_id,
            class_name,
        });
    }
    if entries.is_empty() {
        return Err(perr(1, "manifest has no entries".into()));
    }
    if !duplicates.is_empty() {
        return Err(Error::Validation(format!("duplicate ids: {}", duplicates.join(", "))));
    }
    let n_classes = names.keys().next_back().map_or(0, |m| m + 1);
    let class_names: Vec<String> = (0..n_classes)
        .map(|i| names.get(&i).cloned().unwrap_or_else(|| format!("class_{i}")))
        .collect();
    let mut unique = class_names.clone();
    unique.sort();
    unique.dedup();
    if unique.len() != class_names.len() {
        return Err(Error::Validation("class names are not unique".into()));
    }
    Ok(DatasetManifest {
        root: csv_path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
        class_names,
        n_folds,
    })
}

/// Entries outside `test_fold`, then entries in it; file order is kept.
pub fn kfold_split(manifest: &DatasetManifest, test_fold: u32) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if test_fold == 0 || test_fold > manifest.n_folds {
        return Err(Error::invalid(format!(
            "test fold {test_fold} outside 1..={}",
            manifest.n_folds
        )));
    }
    Ok(manifest.entries.iter().cloned().partition(|e| e.fold != test_fold))
}

// ---------------------------------------------------------------- synthetic data

/// Generator settings for the band-separable dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Lower edge of the lowest class band.
    pub band_lo_hz: f64,
    /// Upper edge of the highest class band.
    pub band_hi_hz: f64,
    /// Fraction of each log-spaced slot left empty between neighbouring bands.
    pub guard: f64,
    /// Noise power relative to the tone mixture, in dB.
    pub noise_db: f64,
    pub min_tones: usize,
    pub max_tones: usize,
    pub n_folds: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            band_lo_hz: 3500.0,
            band_hi_hz: 3950.0,
            guard: 0.02,
            noise_db: -20.0,
            min_tones: 2,
            max_tones: 3,
            n_folds: DEFAULT_N_FOLDS,
        }
    }
}

impl SynthSpec {
    /// `[lo, hi)` frequency band of each class, log-spaced and disjoint.
    pub fn bands(&self, n_classes: usize) -> Vec<(f64, f64)> {
        let ratio = self.band_hi_hz / self.band_lo_hz;
        (0..n_classes)
            .map(|c| {
                let at = |x: f64| self.band_lo_hz * ratio.powf(x / n_classes as f64);
                let pad = self.guard / 2.0;
                (at(c as f64 + pad), at(c as f64 + 1.0 - pad))
            })
            .collect()
    }
}

pub fn synth_dataset(
    n_classes: usize,
    clips_per_class: usize,
    clip_seconds: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<Vec<ClipExample>> {
    synth_dataset_with(&SynthSpec::default(), n_classes, clips_per_class, clip_seconds, sample_rate_hz, seed)
}

/// Class `c` clips: 2–3 sinusoids with log-uniform frequencies inside band
/// `c`, jittered amplitudes and phases, plus Gaussian noise band-limited to
/// the span of all bands. Folds are assigned round-robin within each class.
pub fn synth_dataset_with(
    spec: &SynthSpec,
    n_classes: usize,
    clips_per_class: usize,
    clip_seconds: f64,
    sample_rate_hz: u32,
    seed: u64,
) -> Result<Vec<ClipExample>> {
    if n_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if !(clip_seconds > 0.0) || sample_rate_hz == 0 {
        return Err(Error::invalid("clip length and sample rate must be positive"));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    if !(spec.band_lo_hz > 0.0 && spec.band_lo_hz < spec.band_hi_hz) || spec.band_hi_hz > nyquist {
        return Err(Error::invalid(format!(
            "class bands {}..{} Hz must lie inside (0, {nyquist}] Hz",
            spec.band_lo_hz, spec.band_hi_hz
        )));
    }
    if spec.min_tones == 0 || spec.min_tones > spec.max_tones || spec.n_folds == 0 {
        return Err(Error::invalid("bad tone count or fold count"));
    }
    let n = (clip_seconds * f64::from(sample_rate_hz)).round() as usize;
    let rate = f64::from(sample_rate_hz);
    let bands = spec.bands(n_classes);
    let noise_gain = 10f64.powf(spec.noise_db / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut out = Vec::with_capacity(n_classes * clips_per_class);
    for (label, &(lo, hi)) in bands.iter().enumerate() {
        for k in 0..clips_per_class {
            let n_tones = rng.random_range(spec.min_tones..=spec.max_tones);
            let mut samples = vec![0.0; n];
            for _ in 0..n_tones {
                let f = lo * (hi / lo).powf(rng.random_range(0.0..1.0));
                let amp = rng.random_range(0.1..0.3);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                for (t, s) in samples.iter_mut().enumerate() {
                    *s += amp * (std::f64::consts::TAU * f * t as f64 / rate + phase).sin();
                }
            }
            let signal_power = samples.iter().map(|x| x * x).sum::<f64>() / n as f64;

            let mut noise: Vec<Complex<f64>> = (0..n)
                .map(|_| Complex::new(gaussian(&mut rng), 0.0))
                .collect();
            fwd.process(&mut noise);
            for (b, c) in noise.iter_mut().enumerate() {
                let freq = b.min(n - b) as f64 * rate / n as f64;
                if freq < spec.band_lo_hz || freq > spec.band_hi_hz {
                    *c = Complex::new(0.0, 0.0);
                }
            }
            inv.process(&mut noise);
            let noise_power = noise.iter().map(|c| c.re * c.re).sum::<f64>() / n as f64;
            if noise_power > 0.0 {
                let g = noise_gain * (signal_power / noise_power).sqrt();
                for (s, c) in samples.iter_mut().zip(&noise) {
                    *s += g * c.re;
                }
            }
            out.push(ClipExample {
                waveform: Waveform::new(samples, sample_rate_hz)?,
                label,
                fold: (k as u32 % spec.n_folds) + 1,
                id: format!("synth_c{label}_{k:04}.wav"),
            });
        }
    }
    Ok(out)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Writes clips as float32 WAVs plus `manifest.csv` under `out_dir`.
pub fn materialize(clips: &[ClipExample], class_names: &[String], out_dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut entries = Vec::with_capacity(clips.len());
    for clip in clips {
        write_wav(&out_dir.join(&clip.id), &clip.waveform, SampleFormat::Float32)?;
        let class_name = class_names
            .get(clip.label)
            .cloned()
            .unwrap_or_else(|| format!("class_{}", clip.label));
        entries.push(ManifestEntry {
            file_name: clip.id.clone(),
            fold: clip.fold,
            class_id: clip.label,
            class_name,
        });
    }
    let n_folds = clips.iter().map(|c| c.fold).max().unwrap_or(1).max(DEFAULT_N_FOLDS);
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        entries,
        class_names: class_names.to_vec(),
        n_folds,
    };
    let path = out_dir.join("manifest.csv");
    fs::write(&path, manifest.to_csv_string()).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}
