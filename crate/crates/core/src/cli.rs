//! The `fbank-egl` command line.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for
//! runtime failures (I/O, malformed audio, diverged training).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{load_manifest, materialize, synth_dataset, read_wav};
use crate::dsp::{power_spectrogram, FrameSpec, WindowKind};
use crate::egl::{run_experiment_with_progress, ExperimentConfig, FoldSplit, RoundReport};
use crate::error::{Error, Result};
use crate::fblayer::{FbLayer, DEFAULT_EPSILON};
use crate::melbank::{triangular_filterbank, FilterBank};
use crate::nn::Checkpoint;
use crate::report::{export_filters, export_filters_overlay, format_percent, ExportFormat, GridLayout};
use crate::smoothing::{clip_negative, smooth_filterbank, SavGolSpec};

#[derive(Debug, Parser)]
#[command(name = "fbank-egl", version, about = "Learnable filter bank experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic band dataset as WAV files plus manifest.csv
    Synth(SynthArgs),
    /// Run one experiment (Fix, Trained or Improved) on a manifest
    Run(RunArgs),
    /// Log filter bank features of one WAV file, as CSV
    Features(FeaturesArgs),
    /// Savitzky-Golay smoothing of a filter bank CSV
    Smooth(SmoothArgs),
    /// Filter bank CSV to an SVG grid
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(2..))]
    pub classes: u32,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    pub clips: u32,
    #[arg(long, default_value_t = 1.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 8000)]
    pub rate: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment config; built-in 8 kHz / 40 filter defaults otherwise
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Held-out fold; the highest fold in the manifest by default
    #[arg(long)]
    pub test_fold: Option<u32>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Filter bank CSV; a triangular bank is built otherwise
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub n_filt: usize,
    /// Defaults to the WAV sample rate (or the bank's nfft)
    #[arg(long)]
    pub nfft: Option<usize>,
    /// Defaults to nfft / 4
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub window: usize,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long)]
    pub clip_negative: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Second bank drawn over the first in every panel
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[arg(long, requires = "cols")]
    pub rows: Option<usize>,
    #[arg(long, requires = "rows")]
    pub cols: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_)
        | Error::DegenerateFilter { .. }
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Config(_)
        | Error::UnsupportedFormat(_) => 2,
        Error::FrozenLayer | Error::TrainingDiverged { .. } | Error::WavParse { .. } | Error::Io { .. } => 3,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ! {
    std::process::exit(run_from(std::env::args_os()))
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Features(a) => features(a),
        Command::Smooth(a) => smooth(a),
        Command::Plot(a) => plot(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".into())
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn synth(a: &SynthArgs) -> Result<()> {
    let n_classes = a.classes as usize;
    let clips = synth_dataset(n_classes, a.clips as usize, a.seconds, a.rate, a.seed)?;
    let names: Vec<String> = (0..n_classes).map(|c| format!("band{c}")).collect();
    let manifest = materialize(&clips, &names, &a.out_dir)?;
    say(&format!(
        "wrote {} clips ({} classes, {} folds) and {}",
        manifest.entries.len(),
        n_classes,
        manifest.n_folds,
        a.out_dir.join("manifest.csv").display()
    ));
    Ok(())
}

fn run(a: &RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let manifest = load_manifest(&a.manifest)?;
    let test_fold = match a.test_fold {
        Some(f) => f,
        None => manifest
            .entries
            .iter()
            .map(|e| e.fold)
            .max()
            .ok_or_else(|| Error::Validation("manifest has no entries".into()))?,
    };
    let clips = manifest.load_clips(&manifest.entries)?;
    let split = FoldSplit::new(clips, test_fold, manifest.n_classes(), cfg.validation_fold)?;
    create_dir(&a.out_dir)?;
    write_file(&a.out_dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;

    let mut written: Result<()> = Ok(());
    let n_classes = split.n_classes;
    let reports = run_experiment_with_progress(&cfg, &split, |r| {
        if written.is_ok() {
            written = write_round(&a.out_dir, r, n_classes, cfg.schedule.epochs);
        }
        eprintln!(
            "round {} ({}): test accuracy {}",
            r.round,
            r.mode.as_str(),
            format_percent(r.test_accuracy)
        );
    })?;
    written?;
    let last = reports.last().ok_or_else(|| Error::Validation("no training runs".into()))?;
    say(&format!("test accuracy: {}", format_percent(last.test_accuracy)));
    Ok(())
}

fn write_round(dir: &Path, r: &RoundReport, n_classes: usize, epochs: usize) -> Result<()> {
    let prefix = format!("round{}", r.round);
    let init_csv = format!("{prefix}_initial_bank.csv");
    let final_csv = format!("{prefix}_final_bank.csv");
    r.initial_bank.write_csv(&dir.join(&init_csv))?;
    r.final_bank.write_csv(&dir.join(&final_csv))?;
    let layout = GridLayout::for_count(r.final_bank.n_filt());
    write_file(
        &dir.join(format!("{prefix}_final_bank.svg")),
        &export_filters(&r.final_bank, ExportFormat::Svg, layout)?,
    )?;
    write_file(
        &dir.join(format!("{prefix}_overlay.svg")),
        &export_filters_overlay(&r.initial_bank, &r.final_bank, layout)?,
    )?;
    let json = serde_json::to_string_pretty(&r.to_json(&init_csv, &final_csv, n_classes)?)
        .map_err(|e| Error::Validation(e.to_string()))?;
    write_file(&dir.join(format!("{prefix}_report.json")), json.as_bytes())?;
    Checkpoint::new(&r.model, epochs, None).save(&dir.join(format!("{prefix}_model.json")))
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let wav = read_wav(&a.wav)?;
    let bank = match &a.bank {
        Some(p) => FilterBank::read_csv(p)?,
        None => {
            let nfft = a.nfft.unwrap_or(wav.sample_rate_hz() as usize);
            let nyquist = f64::from(wav.sample_rate_hz()) / 2.0;
            triangular_filterbank(a.n_filt, nfft, wav.sample_rate_hz(), 0.0, nyquist)?
        }
    };
    if bank.sample_rate_hz() != wav.sample_rate_hz() {
        return Err(Error::Validation(format!(
            "bank is for {} Hz, {} is {} Hz",
            bank.sample_rate_hz(),
            a.wav.display(),
            wav.sample_rate_hz()
        )));
    }
    if a.nfft.is_some_and(|n| n != bank.nfft()) {
        return Err(Error::Validation(format!("--nfft differs from the bank's nfft {}", bank.nfft())));
    }
    let nfft = bank.nfft();
    let spec = FrameSpec::new(nfft, a.hop.unwrap_or((nfft / 4).max(1)), WindowKind::Hann)?;
    let power = power_spectrogram(&wav, spec)?;
    let layer = FbLayer::new(bank, a.epsilon, false)?;
    let (feat, _) = layer.forward(&power)?;

    let mut s = format!(
        "# n_filt={},n_frames={},nfft={},hop={},sample_rate_hz={},epsilon={:e}\n",
        feat.rows(),
        feat.cols(),
        spec.nfft,
        spec.hop,
        wav.sample_rate_hz(),
        a.epsilon
    );
    let header: Vec<String> = (0..feat.rows()).map(|i| format!("filt_{i}")).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for t in 0..feat.cols() {
        for i in 0..feat.rows() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{:.16e}", feat.get(i, t));
        }
        s.push('\n');
    }
    create_dir(&a.out_dir)?;
    let out = a.out_dir.join(format!("{}_features.csv", stem(&a.wav)));
    write_file(&out, s.as_bytes())?;
    say(&format!("{} frames x {} filters -> {}", feat.cols(), feat.rows(), out.display()));
    Ok(())
}

fn smooth(a: &SmoothArgs) -> Result<()> {
    let bank = FilterBank::read_csv(&a.input)?;
    let spec = SavGolSpec::new(a.window, a.order)?;
    let mut out = smooth_filterbank(&bank, &spec)?;
    if a.clip_negative {
        out = clip_negative(&out);
    }
    create_dir(&a.out_dir)?;
    let path = a.out_dir.join(format!("{}_smoothed.csv", stem(&a.input)));
    out.write_csv(&path)?;
    say(&format!("smoothed {} filters -> {}", out.n_filt(), path.display()));
    Ok(())
}

fn plot(a: &PlotArgs) -> Result<()> {
    let bank = FilterBank::read_csv(&a.input)?;
    let layout = match (a.rows, a.cols) {
        (Some(rows), Some(cols)) => GridLayout { rows, cols },
        _ => GridLayout::for_count(bank.n_filt()),
    };
    let bytes = match &a.overlay {
        Some(p) => export_filters_overlay(&bank, &FilterBank::read_csv(p)?, layout)?,
        None => export_filters(&bank, ExportFormat::Svg, layout)?,
    };
    create_dir(&a.out_dir)?;
    let path = a.out_dir.join(format!("{}.svg", stem(&a.input)));
    write_file(&path, &bytes)?;
    say(&format!("{} panels -> {}", bank.n_filt(), path.display()));
    Ok(())
}
