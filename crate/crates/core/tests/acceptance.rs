//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criterion 9 needs a local UrbanSound8K copy: set `FBANK_EGL_US8K` to its
//! metadata CSV to enable it.

#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fbank_egl::data::{load_manifest, synth_dataset};
use fbank_egl::dsp::{power_spectrogram, split_clip, FrameSpec, Waveform};
use fbank_egl::egl::{majority_vote, predict_clip, run_experiment, ExperimentConfig, FoldSplit, WeightMode};
use fbank_egl::fblayer::FbLayer;
use fbank_egl::melbank::{triangular_filterbank, FilterBank, Provenance};
use fbank_egl::nn::{
    argmax, leaky_relu_backward, leaky_relu_forward, maxpool_backward, maxpool_forward, predict_scores,
    scheduled_lr, softmax_xent, Architecture, Conv2d, Dense, Model, ModelConfig, Tensor3, TrainSchedule,
};
use fbank_egl::smoothing::{savgol_kernel, smooth_filterbank, total_variation, SavGolSpec};
use fbank_egl::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::oracle_log_mel;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------- 1

/// Independent `sum G ⊙ ln(max(W f, 0) + eps)` over the filters in `rows`
/// and the frames in `frames_at`.
fn fb_loss(w: &Matrix, frames: &Matrix, g: &Matrix, eps: f64, rows: &[usize], frames_at: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &i in rows {
        for &t in frames_at {
            let m: f64 = (0..w.cols()).map(|j| w.get(i, j) * frames.get(t, j)).sum();
            loss += g.get(i, t) * (m.max(0.0) + eps).ln();
        }
    }
    loss
}

/// Fourth-order central difference.
fn deriv(h: f64, f: impl Fn(f64) -> f64) -> f64 {
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut checked) = (0.0f64, 0usize);
    let h = 1e-4;
    for _ in 0..120 {
        let n_filt = rng.random_range(1..=8);
        let n_bins = rng.random_range(2..=32);
        let t_len = rng.random_range(1..=6);
        let nfft = 2 * (n_bins - 1);
        let w = Matrix::from_fn(n_filt, n_bins, |_, _| rng.random_range(0.0..1.0));
        let frames = Matrix::from_fn(t_len, n_bins, |_, _| rng.random_range(0.1..1.0));
        let g = Matrix::from_fn(n_filt, t_len, |_, _| rng.random_range(-1.0..1.0));
        let eps = 1e-10;
        let bank = FilterBank::new(w.clone(), nfft, 8000, Provenance::Trained).map_err(|e| e.to_string())?;
        let layer = FbLayer::new(bank, eps, true).map_err(|e| e.to_string())?;
        let (_, cache) = layer.forward_frames(&frames).map_err(|e| e.to_string())?;
        let (gw, gf) = layer.backward(&g, &cache).map_err(|e| e.to_string())?;
        // only terms touching the perturbed entry enter each difference
        let all_rows: Vec<usize> = (0..n_filt).collect();
        let all_frames: Vec<usize> = (0..t_len).collect();
        for i in 0..n_filt {
            for j in 0..n_bins {
                let num = deriv(h, |d| {
                    let mut wd = w.clone();
                    wd.set(i, j, w.get(i, j) + d);
                    fb_loss(&wd, &frames, &g, eps, &[i], &all_frames)
                });
                worst = worst.max(rel_err(gw.get(i, j), num));
                checked += 1;
            }
        }
        for j in 0..n_bins {
            for t in 0..t_len {
                let num = deriv(h, |d| {
                    let mut fd = frames.clone();
                    fd.set(t, j, frames.get(t, j) + d);
                    fb_loss(&w, &fd, &g, eps, &all_rows, &[t])
                });
                worst = worst.max(rel_err(gf.get(j, t), num));
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("120 instances, {checked} partials, worst rel err {worst:.2e}, {secs:.2}s");
    if worst <= 1e-5 && secs < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (rate, nfft, hop, n_filt) = (8000u32, 256usize, 64usize, 20usize);
    let bank = triangular_filterbank(n_filt, nfft, rate, 0.0, 4000.0).map_err(|e| e.to_string())?;
    let layer = FbLayer::new(bank, 1e-10, false).map_err(|e| e.to_string())?;
    let spec = FrameSpec::new(nfft, hop, Default::default()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let len = rng.random_range(nfft..4 * nfft);
        let samples: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples.clone(), rate).map_err(|e| e.to_string())?;
        let (feat, _) = layer
            .forward(&power_spectrogram(&w, spec).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let oracle = oracle_log_mel(&samples, rate, nfft, hop, n_filt);
        if oracle.len() != feat.cols() {
            return Err(format!("{} oracle frames vs {}", oracle.len(), feat.cols()));
        }
        for (t, row) in oracle.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                worst = worst.max((feat.get(i, t) - v).abs());
            }
        }
    }
    let msg = format!("10 random waveforms, max abs diff {worst:.2e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 3

fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor3 {
    Tensor3::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central difference of `f` at every coordinate of `x`, compared to `analytic`.
fn fd_check(x: &[f64], analytic: &[f64], f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let down = f(&xp);
        xp[i] = x[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0f64; 6];
    for _ in 0..10 {
        let (cin, cout, h, w) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(2..7), rng.random_range(2..7));

        // conv
        let mut conv = Conv2d::new(cin, cout, 3).map_err(|e| e.to_string())?;
        conv.init(&mut rng, 0.33);
        conv.bias.iter_mut().for_each(|b| *b = 0.1);
        let x = rand_tensor(&mut rng, cin, h, w);
        let g = rand_tensor(&mut rng, cout, h, w);
        let grads = conv.backward(&x, &g).map_err(|e| e.to_string())?;
        let c0 = conv.clone();
        worst[0] = worst[0].max(fd_check(&x.data, &grads.input.data, &mut |v| {
            dot(&c0.forward(&Tensor3::from_vec(cin, h, w, v.to_vec())).unwrap().data, &g.data)
        }));
        worst[0] = worst[0].max(fd_check(&conv.weights, &grads.weights, &mut |v| {
            let mut c = c0.clone();
            c.weights = v.to_vec();
            dot(&c.forward(&x).unwrap().data, &g.data)
        }));
        worst[0] = worst[0].max(fd_check(&conv.bias, &grads.bias, &mut |v| {
            let mut c = c0.clone();
            c.bias = v.to_vec();
            dot(&c.forward(&x).unwrap().data, &g.data)
        }));

        // max pool
        let (pooled, arg) = maxpool_forward(&x).map_err(|e| e.to_string())?;
        let gp = rand_tensor(&mut rng, pooled.c, pooled.h, pooled.w);
        let gx = maxpool_backward(x.shape(), &arg, &gp).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(fd_check(&x.data, &gx.data, &mut |v| {
            dot(&maxpool_forward(&Tensor3::from_vec(cin, h, w, v.to_vec())).unwrap().0.data, &gp.data)
        }));

        // leaky relu, away from the kink
        let xr = Tensor3::from_vec(cin, h, w, x.data.iter().map(|v| if v.abs() < 1e-3 { 0.5 } else { *v }).collect());
        let gr = rand_tensor(&mut rng, cin, h, w);
        let gl = leaky_relu_backward(&xr, &gr, 0.33);
        worst[2] = worst[2].max(fd_check(&xr.data, &gl.data, &mut |v| {
            dot(&leaky_relu_forward(&Tensor3::from_vec(cin, h, w, v.to_vec()), 0.33).data, &gr.data)
        }));

        // dense
        let (n_in, n_out) = (rng.random_range(1..12), rng.random_range(1..6));
        let mut dense = Dense::new(n_in, n_out).map_err(|e| e.to_string())?;
        dense.init(&mut rng, 0.33);
        let xd: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gd: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dg = dense.backward(&xd, &gd).map_err(|e| e.to_string())?;
        let d0 = dense.clone();
        worst[3] = worst[3].max(fd_check(&xd, &dg.input, &mut |v| dot(&d0.forward(v).unwrap(), &gd)));
        worst[3] = worst[3].max(fd_check(&dense.weights, &dg.weights, &mut |v| {
            let mut d = d0.clone();
            d.weights = v.to_vec();
            dot(&d.forward(&xd).unwrap(), &gd)
        }));

        // softmax cross-entropy
        let logits: Vec<f64> = (0..n_out + 1).map(|_| rng.random_range(-3.0..3.0)).collect();
        let label = rng.random_range(0..logits.len());
        let (_, gs) = softmax_xent(&logits, label).map_err(|e| e.to_string())?;
        worst[4] = worst[4].max(fd_check(&logits, &gs, &mut |v| softmax_xent(v, label).unwrap().0));
    }

    // whole shallow network, input gradient
    let model = Model::new(ModelConfig::new(Architecture::Shallow, 3, (8, 8)), 4).map_err(|e| e.to_string())?;
    let x = rand_tensor(&mut rng, 1, 8, 8);
    let (logits, trace) = model.forward_trace(&x).map_err(|e| e.to_string())?;
    let (_, gl) = softmax_xent(&logits, 1).map_err(|e| e.to_string())?;
    let (gx, _) = model.backward(&trace, &gl).map_err(|e| e.to_string())?;
    worst[5] = fd_check(&x.data, &gx.data, &mut |v| {
        softmax_xent(&model.forward(&Tensor3::from_vec(1, 8, 8, v.to_vec())).unwrap(), 1).unwrap().0
    });

    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let msg = format!(
        "conv {:.1e}, pool {:.1e}, lrelu {:.1e}, dense {:.1e}, softmax {:.1e}, model {:.1e}; {secs:.2}s",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    );
    if max <= 1e-5 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 4

/// Smoothing weights by fitting a polynomial to each unit impulse and
/// evaluating the fit at the window centre.
fn lsq_kernel(window: usize, order: usize) -> Vec<f64> {
    let half = (window / 2) as i64;
    let xs: Vec<f64> = (-half..=half).map(|x| x as f64).collect();
    let n = order + 1;
    (0..window)
        .map(|j| {
            // normal equations A^T A c = A^T e_j
            let mut a = vec![vec![0.0; n + 1]; n];
            for r in 0..n {
                for c in 0..n {
                    a[r][c] = xs.iter().map(|x| x.powi((r + c) as i32)).sum();
                }
                a[r][n] = xs[j].powi(r as i32);
            }
            for col in 0..n {
                let piv = (col..n).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap()).unwrap();
                a.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        for c in col..=n {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
            a[0][n] / a[0][0]
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let k = savgol_kernel(&SavGolSpec::new(5, 2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let oracle = lsq_kernel(5, 2);
    let exact = [-3.0 / 35.0, 12.0 / 35.0, 17.0 / 35.0, 12.0 / 35.0, -3.0 / 35.0];
    let kernel_err = k
        .iter()
        .zip(&oracle)
        .zip(&exact)
        .map(|((a, b), c)| (a - b).abs().max((a - c).abs()))
        .fold(0.0, f64::max);

    // polynomials up to the fit order pass through unchanged wherever the
    // whole window lies inside the row
    let spec = SavGolSpec::default();
    let n_bins = 65;
    let half = spec.window_len / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut poly_err = 0.0f64;
    for degree in 0..=spec.poly_order {
        let coef: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Matrix::from_fn(1, n_bins, |_, j| {
            let x = j as f64 / 16.0;
            coef.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum()
        });
        let fb = FilterBank::new(w.clone(), 2 * (n_bins - 1), 8000, Provenance::Trained).map_err(|e| e.to_string())?;
        let s = smooth_filterbank(&fb, &spec).map_err(|e| e.to_string())?;
        for j in half..n_bins - half {
            poly_err = poly_err.max((s.weights().get(0, j) - w.get(0, j)).abs());
        }
    }

    let tri = triangular_filterbank(12, 256, 8000, 0.0, 4000.0).map_err(|e| e.to_string())?;
    let noisy = Matrix::from_fn(tri.n_filt(), tri.n_bins(), |i, j| tri.weights().get(i, j) + rng.random_range(-0.05..0.05));
    let noisy = tri.with_weights(noisy, Provenance::Trained).map_err(|e| e.to_string())?;
    let smoothed = smooth_filterbank(&noisy, &spec).map_err(|e| e.to_string())?;
    let tv_down = (0..tri.n_filt())
        .filter(|&i| total_variation(smoothed.weights().row(i)) < total_variation(noisy.weights().row(i)))
        .count();

    let msg = format!(
        "kernel(5,2) err {kernel_err:.1e}, interior polynomial err {poly_err:.1e}, TV reduced on {tv_down}/{} rows",
        tri.n_filt()
    );
    if kernel_err <= 1e-12 && poly_err <= 1e-9 && tv_down == tri.n_filt() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let s = TrainSchedule::default();
    let e0 = scheduled_lr(&s, 0);
    let e3 = scheduled_lr(&s, 3);
    let oracle3 = 0.001 / (1.0 + 0.006 * 3.0);
    let msg = format!("epoch 0 -> {e0}, epoch 3 -> {e3:.10} (oracle {oracle3:.10})");
    if e0 == 0.001 && (e3 - 0.000_982_32).abs() <= 1e-8 && (e3 - oracle3).abs() <= 1e-15 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let base = ExperimentConfig {
        n_filt: 16,
        clip_seconds: 1.0,
        segment_seconds: 1.0,
        nfft: Some(1024),
        majority_vote: false,
        arch: Architecture::Shallow,
        schedule: TrainSchedule { epochs: 30, ..TrainSchedule::default() },
        ..ExperimentConfig::preset_8k_40()
    };
    let mut acc = [Vec::new(), Vec::new(), Vec::new()];
    let mut slowest = Duration::ZERO;
    for seed in 0..5u64 {
        let clips = synth_dataset(3, 60, 1.0, 8000, seed).map_err(|e| e.to_string())?;
        let split = FoldSplit::new(clips, 1, 3, true).map_err(|e| e.to_string())?;
        for (k, mode) in [WeightMode::Fix, WeightMode::Trained, WeightMode::Improved].into_iter().enumerate() {
            let cfg = ExperimentConfig { weight_mode: mode, seed, ..base.clone() };
            let t = Instant::now();
            let reports = run_experiment(&cfg, &split).map_err(|e| e.to_string())?;
            slowest = slowest.max(t.elapsed());
            acc[k].push(reports.last().expect("report").test_accuracy * 100.0);
        }
    }
    let [fix, trained, improved] = acc.map(median);
    let msg = format!(
        "median held-out acc over 5 seeds: fix {fix:.2}, trained {trained:.2}, improved {improved:.2}; slowest run {:.1}s",
        slowest.as_secs_f64()
    );
    if trained >= fix && improved >= fix + 1.0 && slowest < Duration::from_secs(600) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 7

fn vote_oracle(preds: &[usize], scores: &[Vec<f64>]) -> usize {
    let mut keyed: Vec<(usize, f64, usize)> = (0..3)
        .map(|c| {
            let count = preds.iter().filter(|&&p| p == c).count();
            let total = scores.iter().map(|s| s[c]).sum::<f64>();
            (count, total, c)
        })
        .collect();
    // most votes, then largest score, then smallest index
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.partial_cmp(&a.1).unwrap()).then(a.2.cmp(&b.2)));
    keyed[0].2
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let levels = [0.0, 0.25, 0.5, 1.0];
    let mut cases = 0usize;
    for len in 1..=5u32 {
        for code in 0..3usize.pow(len) {
            let preds: Vec<usize> = (0..len).map(|i| code / 3usize.pow(i) % 3).collect();
            let mut score_sets = vec![Vec::new()];
            for _ in 0..4 {
                score_sets.push((0..len).map(|_| (0..3).map(|_| levels[rng.random_range(0..4)]).collect()).collect());
            }
            for scores in &score_sets {
                let got = majority_vote(&preds, scores).map_err(|e| e.to_string())?;
                if got != vote_oracle(&preds, scores) {
                    return Err(format!("{preds:?} {scores:?}: got {got}"));
                }
                cases += 1;
            }
        }
    }

    // four one-second segments of a four-second clip
    let cfg = ExperimentConfig {
        n_filt: 16,
        nfft: Some(1024),
        clip_seconds: 4.0,
        segment_seconds: 1.0,
        majority_vote: true,
        weight_mode: WeightMode::Fix,
        schedule: TrainSchedule { epochs: 3, ..TrainSchedule::default() },
        ..ExperimentConfig::preset_8k_40()
    };
    let clips = synth_dataset(3, 6, 4.0, 8000, 7).map_err(|e| e.to_string())?;
    let split = FoldSplit::new(clips, 1, 3, false).map_err(|e| e.to_string())?;
    let report = run_experiment(&cfg, &split).map_err(|e| e.to_string())?.remove(0);
    let clip = &split.test[0].waveform;
    let segments = split_clip(clip, 1.0).map_err(|e| e.to_string())?;
    let frame = cfg.frame_spec().map_err(|e| e.to_string())?;
    let scores: Vec<Vec<f64>> = segments
        .iter()
        .map(|s| predict_scores(&report.model, &report.fb, &power_spectrogram(s, frame).unwrap()).unwrap())
        .collect();
    let preds: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    let expected = vote_oracle(&preds, &scores);
    let got = predict_clip(&report.model, &report.fb, clip, &cfg).map_err(|e| e.to_string())?;
    let msg = format!(
        "{cases} brute-force cases match; 4 s clip -> {} segments {preds:?} -> class {got}",
        segments.len()
    );
    if segments.len() == 4 && got == expected {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 8

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fbank-egl"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn artifacts(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv")))
        .map(|p| (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let data = root.join("data");
    cli(&["synth", "--classes", "3", "--clips", "10", "--seconds", "1", "--rate", "8000", "--seed", "8", "--out-dir", data.to_str().unwrap()])?;
    let cfg = ExperimentConfig {
        n_filt: 16,
        nfft: Some(1024),
        clip_seconds: 1.0,
        segment_seconds: 1.0,
        schedule: TrainSchedule { epochs: 3, ..TrainSchedule::default() },
        ..ExperimentConfig::preset_8k_40()
    };
    let cfg_path = root.join("cfg.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()).map_err(|e| e.to_string())?;
    let manifest = data.join("manifest.csv");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = root.join(name);
        cli(&[
            "run", "--config", cfg_path.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
            "--out-dir", out.to_str().unwrap(), "--seed", "5",
        ])?;
        runs.push(artifacts(&out));
    }
    let reports = runs[0].iter().filter(|(p, _)| p.to_string_lossy().ends_with("_report.json")).count();
    let msg = format!("{} JSON/CSV files per run, {reports} round reports, byte-identical: {}", runs[0].len(), runs[0] == runs[1]);
    if runs[0] == runs[1] && reports == 2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Option<Outcome> {
    let path = PathBuf::from(std::env::var_os("FBANK_EGL_US8K")?);
    let run = || -> Outcome {
        let manifest = load_manifest(&path).map_err(|e| e.to_string())?;
        let clips = manifest.load_clips(&manifest.entries).map_err(|e| e.to_string())?;
        let targets = [(WeightMode::Fix, 69.03), (WeightMode::Trained, 69.43), (WeightMode::Improved, 71.41)];
        let mut lines = Vec::new();
        let mut ok = true;
        for (mode, target) in targets {
            let cfg = ExperimentConfig { weight_mode: mode, ..ExperimentConfig::preset_8k_40() };
            let mut accs = Vec::new();
            for fold in 1..=10 {
                let split = FoldSplit::new(clips.clone(), fold, manifest.n_classes(), true).map_err(|e| e.to_string())?;
                let reports = run_experiment(&cfg, &split).map_err(|e| e.to_string())?;
                accs.push(reports.last().unwrap().test_accuracy * 100.0);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            ok &= (mean - target).abs() <= 3.0;
            lines.push(format!("{} {mean:.2} (target {target})", mode.as_str()));
        }
        let msg = lines.join(", ");
        if ok {
            Ok(msg)
        } else {
            Err(msg)
        }
    };
    Some(run())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 filter bank layer gradient vs finite differences", criterion_1),
        ("2 frozen triangular layer equals log-mel oracle", criterion_2),
        ("3 network layer gradients vs finite differences", criterion_3),
        ("4 Savitzky-Golay kernel, fixed points, total variation", criterion_4),
        ("5 learning rate schedule", criterion_5),
        ("6 desk-scale Fix / Trained / Improved trend", criterion_6),
        ("7 majority vote", criterion_7),
        ("8 run determinism", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(m) => println!("PASS criterion {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {name}: {m}");
            }
        }
    }
    match criterion_9() {
        None => println!("SKIP criterion 9 UrbanSound8K 10-fold run: FBANK_EGL_US8K not set"),
        Some(Ok(m)) => println!("PASS criterion 9 UrbanSound8K 10-fold run: {m}"),
        Some(Err(m)) => {
            failed += 1;
            println!("FAIL criterion 9 UrbanSound8K 10-fold run: {m}");
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
