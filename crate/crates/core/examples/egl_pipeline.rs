//! Train, smooth, re-initialize, retrain on a small synthetic set, then
//! write the banks and an overlay plot.
//!
//!     cargo run --release --example egl_pipeline -- /tmp/egl_out

use std::path::PathBuf;

use fbank_egl::data::synth_dataset;
use fbank_egl::egl::{run_experiment, ExperimentConfig, FoldSplit, WeightMode};
use fbank_egl::nn::TrainSchedule;
use fbank_egl::report::{export_filters_overlay, format_percent, GridLayout};

fn main() -> fbank_egl::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "egl_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| fbank_egl::Error::Io { context: out.display().to_string(), source: e })?;

    let cfg = ExperimentConfig {
        n_filt: 16,
        nfft: Some(1024),
        clip_seconds: 1.0,
        segment_seconds: 1.0,
        weight_mode: WeightMode::Improved,
        rounds: 2,
        schedule: TrainSchedule { epochs: 10, ..TrainSchedule::default() },
        ..ExperimentConfig::preset_8k_40()
    };
    let split = FoldSplit::new(synth_dataset(3, 30, 1.0, 8000, 0)?, 1, 3, true)?;
    for r in run_experiment(&cfg, &split)? {
        println!(
            "round {}: {} -> {}, test accuracy {}%",
            r.round,
            r.initial_bank.provenance().as_str(),
            r.final_bank.provenance().as_str(),
            format_percent(r.test_accuracy)
        );
        r.final_bank.write_csv(&out.join(format!("round{}_bank.csv", r.round)))?;
        let svg = export_filters_overlay(&r.initial_bank, &r.final_bank, GridLayout::for_count(cfg.n_filt))?;
        std::fs::write(out.join(format!("round{}_overlay.svg", r.round)), svg)
            .map_err(|e| fbank_egl::Error::Io { context: "writing svg".into(), source: e })?;
    }
    println!("banks and plots in {}", out.display());
    Ok(())
}
