//! Fix, Trained and Improved on the synthetic 3-class set over several seeds.
//!
//!     cargo run --release --example desk_trend -- 5

use std::time::Instant;

use fbank_egl::data::synth_dataset;
use fbank_egl::egl::{run_experiment, ExperimentConfig, FoldSplit, WeightMode};

fn main() -> fbank_egl::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let base = ExperimentConfig {
        n_filt: 16,
        clip_seconds: 1.0,
        segment_seconds: 1.0,
        nfft: Some(1024),
        ..ExperimentConfig::preset_8k_40()
    };
    for seed in 0..n_seeds {
        let split = FoldSplit::new(synth_dataset(3, 60, 1.0, 8000, seed)?, 1, 3, true)?;
        let mut row = Vec::new();
        for mode in [WeightMode::Fix, WeightMode::Trained, WeightMode::Improved] {
            let t = Instant::now();
            let cfg = ExperimentConfig { weight_mode: mode, seed, ..base.clone() };
            let last = run_experiment(&cfg, &split)?.pop().expect("at least one report");
            row.push(format!(
                "{} {:.2}% ({:.1}s)",
                mode.as_str(),
                last.test_accuracy * 100.0,
                t.elapsed().as_secs_f64()
            ));
        }
        println!("seed {seed}: {}", row.join(", "));
    }
    Ok(())
}
