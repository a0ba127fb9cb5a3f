//! Accuracy, confusion matrices and filter bank plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::melbank::FilterBank;

fn check_pair(predictions: &[usize], labels: &[usize]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Entry `[i][j]` counts examples of true class `i` predicted as `j`.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    check_pair(predictions, labels)?;
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(Error::invalid(format!("class {} out of range for {n_classes} classes", p.max(l))));
        }
        m[l][p] += 1;
    }
    Ok(m)
}

/// `0.7163` → `"71.63"`.
pub fn format_percent(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
}

impl GridLayout {
    /// Near-square grid that fits `n` panels.
    pub fn for_count(n: usize) -> Self {
        let cols = ((n.max(1) as f64).sqrt().ceil() as usize).max(1);
        Self {
            rows: n.max(1).div_ceil(cols),
            cols,
        }
    }

    pub fn capacity(&self) -> usize {
        self.rows * self.cols
    }
}

const PANEL_W: f64 = 180.0;
const PANEL_H: f64 = 120.0;
const PLOT_X0: f64 = 34.0;
const PLOT_X1: f64 = 170.0;
const PLOT_Y0: f64 = 18.0;
const PLOT_Y1: f64 = 96.0;

/// Serializes a bank as CSV, or as an SVG grid of per-filter plots in order
/// of increasing peak frequency.
pub fn export_filters(fb: &FilterBank, format: ExportFormat, layout: GridLayout) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Csv => Ok(fb.to_csv_string().into_bytes()),
        ExportFormat::Svg => render_svg(fb, None, layout).map(String::into_bytes),
    }
}

/// Same grid with the `smoothed` bank drawn over `raw` in every panel.
pub fn export_filters_overlay(raw: &FilterBank, smoothed: &FilterBank, layout: GridLayout) -> Result<Vec<u8>> {
    if raw.weights().shape() != smoothed.weights().shape() {
        return Err(Error::invalid("overlay banks differ in shape"));
    }
    render_svg(raw, Some(smoothed), layout).map(String::into_bytes)
}

fn render_svg(fb: &FilterBank, overlay: Option<&FilterBank>, layout: GridLayout) -> Result<String> {
    let n = fb.n_filt();
    if layout.capacity() < n {
        return Err(Error::invalid(format!(
            "a {}x{} grid cannot hold {n} filters",
            layout.rows, layout.cols
        )));
    }
    let peaks = fb.peak_bins();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (peaks[i], i));

    let width = PANEL_W * layout.cols as f64;
    let height = PANEL_H * layout.rows as f64;
    let nyquist_khz = f64::from(fb.sample_rate_hz()) / 2000.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="9">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (slot, &f) in order.iter().enumerate() {
        let ox = PANEL_W * (slot % layout.cols) as f64;
        let oy = PANEL_H * (slot / layout.cols) as f64;
        let raw = fb.weights().row(f);
        let (mut lo, mut hi) = range(raw);
        if let Some(o) = overlay {
            let (l2, h2) = range(o.weights().row(f));
            lo = lo.min(l2);
            hi = hi.max(h2);
        }
        let _ = writeln!(s, r#"<g class="panel" transform="translate({ox},{oy})">"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="12" text-anchor="middle">filter {f} (peak {:.2} kHz)</text>"#,
            (PLOT_X0 + PLOT_X1) / 2.0,
            fb.bin_hz(peaks[f]) / 1000.0
        );
        let _ = writeln!(
            s,
            r#"<path class="axes" d="M{PLOT_X0} {PLOT_Y0}V{PLOT_Y1}H{PLOT_X1}" fill="none" stroke="black" stroke-width="0.6"/>"#
        );
        let _ = writeln!(s, r#"<text x="{PLOT_X0}" y="{}" text-anchor="middle">0</text>"#, PLOT_Y1 + 10.0);
        let _ = writeln!(
            s,
            r#"<text x="{PLOT_X1}" y="{}" text-anchor="end">{nyquist_khz:.2}</text>"#,
            PLOT_Y1 + 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">kHz</text>"#,
            (PLOT_X0 + PLOT_X1) / 2.0,
            PLOT_Y1 + 18.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.2}</text>"#, PLOT_X0 - 2.0, PLOT_Y0 + 3.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.2}</text>"#, PLOT_X0 - 2.0, PLOT_Y1);
        polyline(&mut s, raw, lo, hi, "filter", "#1f4e9c");
        if let Some(o) = overlay {
            polyline(&mut s, o.weights().row(f), lo, hi, "smoothed", "#d0491f");
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn range(row: &[f64]) -> (f64, f64) {
    let lo = row.iter().copied().fold(0.0f64, f64::min);
    let hi = row.iter().copied().fold(lo, f64::max);
    if hi - lo < 1e-12 {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

fn polyline(s: &mut String, row: &[f64], lo: f64, hi: f64, class: &str, color: &str) {
    let last = (row.len().max(2) - 1) as f64;
    let _ = write!(s, r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="0.8" points=""#);
    for (k, &v) in row.iter().enumerate() {
        let x = PLOT_X0 + (PLOT_X1 - PLOT_X0) * k as f64 / last;
        let y = PLOT_Y1 - (PLOT_Y1 - PLOT_Y0) * (v - lo) / (hi - lo);
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s.push_str("\"/>\n");
}
