//! The experience-guided loop: initialize the filter bank layer from
//! triangular mel filters, train, smooth the learned weights, re-initialize
//! and retrain. Also clip-level prediction with majority voting over
//! segments.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ClipExample;
use crate::dsp::{power_spectrogram, resample, split_clip, FrameSpec, PowerSpectrogram, Waveform, WindowKind};
use crate::error::{Error, Result};
use crate::fblayer::{FbLayer, GradientRule, DEFAULT_EPSILON};
use crate::melbank::{triangular_filterbank, FilterBank, Provenance};
use crate::nn::{argmax, predict_scores, train_model, Architecture, EpochStats, LabeledSpectrogram, Model, ModelConfig, TrainSchedule};
use crate::smoothing::{clip_negative, smooth_filterbank, SavGolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowInit {
    #[default]
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Frozen triangular bank: a plain log-mel front end.
    Fix,
    /// Trainable bank initialized from triangles.
    Trained,
    /// Trained, then smoothed and retrained `rounds` times.
    #[default]
    Improved,
}

impl WeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Fix => "fix",
            WeightMode::Trained => "trained",
            WeightMode::Improved => "improved",
        }
    }
}

fn default_true() -> bool {
    true
}

/// One experiment row: front end, classifier, schedule and smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub window_init: WindowInit,
    #[serde(default)]
    pub arch: Architecture,
    pub n_filt: usize,
    #[serde(default)]
    pub weight_mode: WeightMode,
    pub clip_seconds: f64,
    pub segment_seconds: f64,
    pub sample_rate_hz: u32,
    #[serde(default)]
    pub majority_vote: bool,
    pub rounds: usize,
    /// Frame length; defaults to the sample rate.
    #[serde(default)]
    pub nfft: Option<usize>,
    /// Hop; defaults to `nfft / 4`.
    #[serde(default)]
    pub hop: Option<usize>,
    #[serde(default)]
    pub window: WindowKind,
    #[serde(default)]
    pub fmin_hz: f64,
    /// Upper mel edge; defaults to Nyquist.
    #[serde(default)]
    pub fmax_hz: Option<f64>,
    pub epsilon: f64,
    pub leaky_slope: f64,
    #[serde(default)]
    pub gradient_rule: GradientRule,
    /// Zero negative weights after smoothing.
    #[serde(default)]
    pub clip_negative: bool,
    /// Hold out the last training fold for per-epoch validation.
    #[serde(default = "default_true")]
    pub validation_fold: bool,
    #[serde(default)]
    pub seed: u64,
    pub schedule: TrainSchedule,
    pub savgol: SavGolSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset_8k_40()
    }
}

impl ExperimentConfig {
    /// 8 kHz, 40 filters, 4 s clips, shallow network.
    pub fn preset_8k_40() -> Self {
        Self {
            window_init: WindowInit::Triangular,
            arch: Architecture::Shallow,
            n_filt: 40,
            weight_mode: WeightMode::Improved,
            clip_seconds: 4.0,
            segment_seconds: 4.0,
            sample_rate_hz: 8000,
            majority_vote: false,
            rounds: 1,
            nfft: None,
            hop: None,
            window: WindowKind::Hann,
            fmin_hz: 0.0,
            fmax_hz: None,
            epsilon: DEFAULT_EPSILON,
            leaky_slope: 0.33,
            gradient_rule: GradientRule::Exact,
            clip_negative: false,
            validation_fold: true,
            seed: 0,
            schedule: TrainSchedule::default(),
            savgol: SavGolSpec::default(),
        }
    }

    /// 22.05 kHz, 128 filters, 1 s segments, VGG-style network.
    pub fn preset_22k_128() -> Self {
        Self {
            arch: Architecture::DeepVgg,
            n_filt: 128,
            clip_seconds: 4.0,
            segment_seconds: 1.0,
            sample_rate_hz: 22050,
            majority_vote: true,
            ..Self::preset_8k_40()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Config(format!("line {line}: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_filt == 0 {
            return Err(Error::Config("n_filt must be >= 1".into()));
        }
        if !(self.clip_seconds > 0.0 && self.segment_seconds > 0.0) {
            return Err(Error::Config("clip_seconds and segment_seconds must be positive".into()));
        }
        if self.segment_seconds > self.clip_seconds {
            return Err(Error::Config("segment_seconds must not exceed clip_seconds".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.weight_mode == WeightMode::Fix && self.rounds != 1 {
            return Err(Error::Config("weight_mode = fix requires rounds = 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky_slope must be in (0,1)".into()));
        }
        self.schedule.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.savgol.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.frame_spec()?;
        Ok(())
    }

    pub fn frame_spec(&self) -> Result<FrameSpec> {
        let nfft = self.nfft.unwrap_or(self.sample_rate_hz as usize);
        FrameSpec::new(nfft, self.hop.unwrap_or((nfft / 4).max(1)), self.window)
    }

    pub fn clip_len(&self) -> usize {
        (self.clip_seconds * f64::from(self.sample_rate_hz)).round() as usize
    }

    /// Samples per model input: one segment with voting, the clip otherwise.
    pub fn input_len(&self) -> usize {
        if self.majority_vote {
            (self.segment_seconds * f64::from(self.sample_rate_hz)).floor() as usize
        } else {
            self.clip_len()
        }
    }

    pub fn initial_bank(&self) -> Result<FilterBank> {
        let spec = self.frame_spec()?;
        let fmax = self.fmax_hz.unwrap_or(f64::from(self.sample_rate_hz) / 2.0);
        match self.window_init {
            WindowInit::Triangular => {
                triangular_filterbank(self.n_filt, spec.nfft, self.sample_rate_hz, self.fmin_hz, fmax)
            }
        }
    }

    fn model_config(&self, n_classes: usize) -> Result<ModelConfig> {
        let frames = self.frame_spec()?.n_frames(self.input_len());
        if frames == 0 {
            return Err(Error::Config(format!(
                "a {} sample input is shorter than nfft",
                self.input_len()
            )));
        }
        Ok(ModelConfig {
            architecture: self.arch,
            n_classes,
            leaky_slope: self.leaky_slope,
            input_shape: (self.n_filt, frames),
        })
    }

    fn layer(&self, bank: FilterBank, trainable: bool) -> Result<FbLayer> {
        Ok(FbLayer::new(bank, self.epsilon, trainable)?.with_gradient_rule(self.gradient_rule))
    }
}

/// A clip turned into model-ready spectrograms.
#[derive(Debug, Clone)]
pub struct PreparedClip {
    pub id: String,
    pub label: usize,
    pub segments: Vec<PowerSpectrogram>,
}

/// Resample, fit to the clip length, split (when voting) and transform.
pub fn clip_spectrograms(clip: &Waveform, cfg: &ExperimentConfig) -> Result<Vec<PowerSpectrogram>> {
    let frame = cfg.frame_spec()?;
    let w = if clip.sample_rate_hz() == cfg.sample_rate_hz {
        clip.clone()
    } else {
        resample(clip, cfg.sample_rate_hz)?
    };
    if w.is_empty() {
        return Err(Error::invalid("empty clip"));
    }
    let w = w.fit_to_len(cfg.clip_len());
    let pieces = if cfg.majority_vote {
        split_clip(&w, cfg.segment_seconds)?
    } else {
        vec![w]
    };
    pieces.iter().map(|p| power_spectrogram(p, frame)).collect()
}

pub fn prepare_clips(clips: &[ClipExample], cfg: &ExperimentConfig) -> Result<Vec<PreparedClip>> {
    clips
        .par_iter()
        .map(|c| {
            Ok(PreparedClip {
                id: c.id.clone(),
                label: c.label,
                segments: clip_spectrograms(&c.waveform, cfg)?,
            })
        })
        .collect()
}

/// Most frequent class; ties go to the larger summed score, then to the
/// lower class index. `segment_scores` may be empty to skip the score rule.
pub fn majority_vote(segment_predictions: &[usize], segment_scores: &[Vec<f64>]) -> Result<usize> {
    if segment_predictions.is_empty() {
        return Err(Error::invalid("majority vote over zero segments"));
    }
    if !segment_scores.is_empty() && segment_scores.len() != segment_predictions.len() {
        return Err(Error::invalid("one score vector per segment required"));
    }
    let n_classes = segment_predictions
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(segment_scores.iter().map(Vec::len).max().unwrap_or(0).saturating_sub(1))
        + 1;
    let mut counts = vec![0usize; n_classes];
    for &p in segment_predictions {
        counts[p] += 1;
    }
    let mut totals = vec![0.0; n_classes];
    for s in segment_scores {
        for (t, v) in totals.iter_mut().zip(s) {
            *t += v;
        }
    }
    let mut best = 0;
    for c in 1..n_classes {
        if counts[c] > counts[best] || (counts[c] == counts[best] && totals[c] > totals[best]) {
            best = c;
        }
    }
    Ok(best)
}

fn predict_segments(model: &Model, fb: &FbLayer, segments: &[PowerSpectrogram]) -> Result<usize> {
    let scores = segments
        .iter()
        .map(|s| predict_scores(model, fb, s))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    if preds.len() == 1 {
        return Ok(preds[0]);
    }
    majority_vote(&preds, &scores)
}

/// Clip-level class: per-segment predictions combined by majority vote when
/// `cfg.majority_vote`, a single prediction on the whole clip otherwise.
pub fn predict_clip(model: &Model, fb: &FbLayer, clip: &Waveform, cfg: &ExperimentConfig) -> Result<usize> {
    predict_segments(model, fb, &clip_spectrograms(clip, cfg)?)
}

pub fn predict_prepared(model: &Model, fb: &FbLayer, clips: &[PreparedClip]) -> Result<Vec<usize>> {
    clips
        .par_iter()
        .map(|c| predict_segments(model, fb, &c.segments))
        .collect()
}

/// Training, validation and test clips for one held-out fold.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub train: Vec<ClipExample>,
    pub val: Vec<ClipExample>,
    pub test: Vec<ClipExample>,
    pub n_classes: usize,
}

impl FoldSplit {
    /// `test_fold` is held out; with `validation` the highest remaining fold
    /// becomes the validation set.
    pub fn new(clips: Vec<ClipExample>, test_fold: u32, n_classes: usize, validation: bool) -> Result<Self> {
        let (mut rest, test): (Vec<_>, Vec<_>) = clips.into_iter().partition(|c| c.fold != test_fold);
        if test.is_empty() {
            return Err(Error::invalid(format!("test fold {test_fold} has no clips")));
        }
        let mut val = Vec::new();
        if validation {
            let mut folds: Vec<u32> = rest.iter().map(|c| c.fold).collect();
            folds.sort_unstable();
            folds.dedup();
            if folds.len() > 1 {
                let val_fold = *folds.last().expect("non-empty");
                let (r, v): (Vec<_>, Vec<_>) = rest.into_iter().partition(|c| c.fold != val_fold);
                rest = r;
                val = v;
            }
        }
        if rest.is_empty() {
            return Err(Error::invalid("no training clips left after the split"));
        }
        if let Some(bad) = rest.iter().chain(&val).chain(&test).find(|c| c.label >= n_classes) {
            return Err(Error::invalid(format!("clip {} has label {} >= {n_classes}", bad.id, bad.label)));
        }
        Ok(Self {
            train: rest,
            val,
            test,
            n_classes,
        })
    }
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: usize,
    pub mode: WeightMode,
    pub initial_bank: FilterBank,
    pub final_bank: FilterBank,
    pub history: Vec<EpochStats>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub test_predictions: Vec<usize>,
    pub test_labels: Vec<usize>,
    pub model: Model,
    pub fb: FbLayer,
}

/// JSON form of a [`RoundReport`]; filter banks live in separate CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReportJson {
    pub round: usize,
    pub mode: WeightMode,
    pub initial_bank_csv: String,
    pub final_bank_csv: String,
    pub initial_provenance: Provenance,
    pub final_provenance: Provenance,
    pub n_filt: usize,
    pub n_bins: usize,
    pub history: Vec<EpochStats>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub test_accuracy_pct: String,
    pub confusion: Vec<Vec<usize>>,
}

impl RoundReport {
    pub fn to_json(&self, initial_bank_csv: &str, final_bank_csv: &str, n_classes: usize) -> Result<RoundReportJson> {
        Ok(RoundReportJson {
            round: self.round,
            mode: self.mode,
            initial_bank_csv: initial_bank_csv.to_string(),
            final_bank_csv: final_bank_csv.to_string(),
            initial_provenance: self.initial_bank.provenance(),
            final_provenance: self.final_bank.provenance(),
            n_filt: self.final_bank.n_filt(),
            n_bins: self.final_bank.n_bins(),
            history: self.history.clone(),
            val_accuracy: self.val_accuracy,
            test_accuracy: self.test_accuracy,
            test_accuracy_pct: crate::report::format_percent(self.test_accuracy),
            confusion: crate::report::confusion_matrix(&self.test_predictions, &self.test_labels, n_classes)?,
        })
    }
}

fn labeled_segments(clips: &[PreparedClip]) -> Vec<LabeledSpectrogram> {
    clips
        .iter()
        .flat_map(|c| {
            c.segments.iter().map(move |s| LabeledSpectrogram {
                spectrogram: s.clone(),
                label: c.label,
            })
        })
        .collect()
}

struct Prepared {
    train: Vec<LabeledSpectrogram>,
    val_segments: Vec<LabeledSpectrogram>,
    val: Vec<PreparedClip>,
    test: Vec<PreparedClip>,
    model_config: ModelConfig,
}

fn run_once(
    cfg: &ExperimentConfig,
    data: &Prepared,
    round: usize,
    bank: FilterBank,
    trainable: bool,
) -> Result<RoundReport> {
    let fb = cfg.layer(bank.clone(), trainable)?;
    // each round gets fresh CNN weights and its own shuffle stream
    let round_seed = cfg.seed.wrapping_add(round as u64);
    let model = Model::new(data.model_config, round_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED)?;
    let sched = TrainSchedule {
        rng_seed: round_seed,
        ..cfg.schedule
    };
    let out = train_model(model, fb, &data.train, &data.val_segments, &sched)?;
    let final_bank = if trainable {
        out.fb.export_bank(Provenance::Trained)
    } else {
        out.fb.bank().clone()
    };
    let val_accuracy = if data.val.is_empty() {
        None
    } else {
        let preds = predict_prepared(&out.model, &out.fb, &data.val)?;
        let labels: Vec<usize> = data.val.iter().map(|c| c.label).collect();
        Some(crate::report::accuracy(&preds, &labels)?)
    };
    let test_predictions = predict_prepared(&out.model, &out.fb, &data.test)?;
    let test_labels: Vec<usize> = data.test.iter().map(|c| c.label).collect();
    Ok(RoundReport {
        round,
        mode: cfg.weight_mode,
        initial_bank: bank,
        final_bank,
        history: out.history,
        val_accuracy,
        test_accuracy: crate::report::accuracy(&test_predictions, &test_labels)?,
        test_predictions,
        test_labels,
        model: out.model,
        fb: out.fb,
    })
}

/// Runs the configured protocol and returns one report per training run:
/// one for `Fix` and `Trained`, `rounds + 1` for `Improved`.
pub fn run_experiment(cfg: &ExperimentConfig, split: &FoldSplit) -> Result<Vec<RoundReport>> {
    run_experiment_with_progress(cfg, split, |_| {})
}

pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    split: &FoldSplit,
    mut on_round: impl FnMut(&RoundReport),
) -> Result<Vec<RoundReport>> {
    cfg.validate()?;
    let train_clips = prepare_clips(&split.train, cfg)?;
    let val = prepare_clips(&split.val, cfg)?;
    let data = Prepared {
        train: labeled_segments(&train_clips),
        val_segments: labeled_segments(&val),
        val,
        test: prepare_clips(&split.test, cfg)?,
        model_config: cfg.model_config(split.n_classes)?,
    };
    let init = cfg.initial_bank()?;
    let mut reports = Vec::new();
    match cfg.weight_mode {
        WeightMode::Fix => reports.push(run_once(cfg, &data, 0, init, false)?),
        WeightMode::Trained => reports.push(run_once(cfg, &data, 0, init, true)?),
        WeightMode::Improved => {
            let first = run_once(cfg, &data, 0, init, true)?;
            on_round(&first);
            let mut prev = first.final_bank.clone();
            reports.push(first);
            for round in 1..=cfg.rounds {
                let mut smoothed = smooth_filterbank(&prev, &cfg.savgol)?;
                if cfg.clip_negative {
                    smoothed = clip_negative(&smoothed);
                }
                let report = run_once(cfg, &data, round, smoothed, true)?;
                on_round(&report);
                prev = report.final_bank.clone();
                reports.push(report);
            }
            return Ok(reports);
        }
    }
    on_round(&reports[0]);
    Ok(reports)
}
