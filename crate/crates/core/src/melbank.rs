//! Triangular mel filter banks and the filter bank file format.
//!
//! Files are a CSV with a metadata comment line followed by one row per
//! filter and one column per bin:
//!
//! ```text
//! # n_filt=40,nfft=8000,sample_rate_hz=8000,provenance=triangular_init
//! bin_0,bin_1,...,bin_4000
//! 0.0000000000000000e0,...
//! ```
//!
//! A JSON sidecar with the same metadata can be written next to it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    TriangularInit,
    Trained,
    Smoothed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::TriangularInit => "triangular_init",
            Provenance::Trained => "trained",
            Provenance::Smoothed => "smoothed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "triangular_init" => Some(Provenance::TriangularInit),
            "trained" => Some(Provenance::Trained),
            "smoothed" => Some(Provenance::Smoothed),
            _ => None,
        }
    }
}

/// `n_filt × (nfft/2+1)` filter weights with construction metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Matrix,
    nfft: usize,
    sample_rate_hz: u32,
    provenance: Provenance,
}

/// Metadata written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankMeta {
    pub n_filt: usize,
    pub n_bins: usize,
    pub nfft: usize,
    pub sample_rate_hz: u32,
    pub provenance: Provenance,
}

impl FilterBank {
    pub fn new(
        weights: Matrix,
        nfft: usize,
        sample_rate_hz: u32,
        provenance: Provenance,
    ) -> Result<Self> {
        if weights.rows() == 0 {
            return Err(Error::invalid("filter bank needs at least one filter"));
        }
        if weights.cols() != nfft / 2 + 1 {
            return Err(Error::invalid(format!(
                "filter bank has {} bins, nfft={nfft} implies {}",
                weights.cols(),
                nfft / 2 + 1
            )));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if weights.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("filter weights must be finite"));
        }
        Ok(Self {
            weights,
            nfft,
            sample_rate_hz,
            provenance,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn into_weights(self) -> Matrix {
        self.weights
    }

    pub fn n_filt(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.cols()
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Same metadata, new weights and provenance.
    pub fn with_weights(&self, weights: Matrix, provenance: Provenance) -> Result<Self> {
        Self::new(weights, self.nfft, self.sample_rate_hz, provenance)
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate_hz) / self.nfft as f64
    }

    /// Bin index of each row's maximum (first occurrence).
    pub fn peak_bins(&self) -> Vec<usize> {
        self.weights
            .iter_rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                        if v > best.1 {
                            (j, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }

    pub fn meta(&self) -> FilterBankMeta {
        FilterBankMeta {
            n_filt: self.n_filt(),
            n_bins: self.n_bins(),
            nfft: self.nfft,
            sample_rate_hz: self.sample_rate_hz,
            provenance: self.provenance,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# n_filt={},nfft={},sample_rate_hz={},provenance={}",
            self.n_filt(),
            self.nfft,
            self.sample_rate_hz,
            self.provenance.as_str()
        );
        let header: Vec<String> = (0..self.n_bins()).map(|j| format!("bin_{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.weights.iter_rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line as u64,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, meta_line) = lines
            .next()
            .ok_or_else(|| perr(1, "empty filter bank file".into()))?;
        let meta = meta_line
            .strip_prefix('#')
            .ok_or_else(|| perr(1, "missing '# n_filt=...' metadata line".into()))?;
        let (mut n_filt, mut nfft, mut rate, mut prov) = (None, None, None, None);
        for kv in meta.trim().split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| perr(1, format!("malformed metadata entry '{kv}'")))?;
            let bad = |_| perr(1, format!("bad value for {k}: '{v}'"));
            match k.trim() {
                "n_filt" => n_filt = Some(v.trim().parse::<usize>().map_err(bad)?),
                "nfft" => nfft = Some(v.trim().parse::<usize>().map_err(bad)?),
                "sample_rate_hz" => rate = Some(v.trim().parse::<u32>().map_err(bad)?),
                "provenance" => {
                    prov = Some(
                        Provenance::parse(v.trim())
                            .ok_or_else(|| perr(1, format!("unknown provenance '{v}'")))?,
                    )
                }
                other => return Err(perr(1, format!("unknown metadata key '{other}'"))),
            }
        }
        let missing = |name: &str| perr(1, format!("metadata is missing {name}"));
        let n_filt = n_filt.ok_or_else(|| missing("n_filt"))?;
        let nfft = nfft.ok_or_else(|| missing("nfft"))?;
        let rate = rate.ok_or_else(|| missing("sample_rate_hz"))?;
        let prov = prov.ok_or_else(|| missing("provenance"))?;
        let n_bins = nfft / 2 + 1;

        let (_, header) = lines.next().ok_or_else(|| perr(2, "missing column header".into()))?;
        if header.split(',').count() != n_bins {
            return Err(perr(2, format!("header has {} columns, expected {n_bins}", header.split(',').count())));
        }
        let mut data = Vec::with_capacity(n_filt * n_bins);
        let mut rows = 0;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for field in line.split(',') {
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| perr(idx + 1, format!("not a number: '{field}'")))?;
                data.push(v);
            }
            if data.len() - before != n_bins {
                return Err(perr(
                    idx + 1,
                    format!("row has {} values, expected {n_bins}", data.len() - before),
                ));
            }
            rows += 1;
        }
        if rows != n_filt {
            return Err(perr(1, format!("metadata says n_filt={n_filt} but file has {rows} rows")));
        }
        FilterBank::new(Matrix::from_vec(n_filt, n_bins, data), nfft, rate, prov)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_csv_str(&text, path)
    }

    pub fn write_json_sidecar(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.meta()).expect("metadata serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// HTK mel scale: `2595 · log10(1 + f/700)`.
pub fn hz_to_mel(f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::invalid(format!("frequency must be >= 0, got {f}")));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn mel_to_hz(m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::invalid(format!("mel value must be >= 0, got {m}")));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// Triangular filters on `n_filt + 2` mel-spaced edge points between
/// `fmin` and `fmax`.
///
/// Triangles are evaluated at exact fractional bin positions, then each row
/// is scaled so its largest sampled value is exactly 1.
pub fn triangular_filterbank(
    n_filt: usize,
    nfft: usize,
    sample_rate_hz: u32,
    fmin: f64,
    fmax: f64,
) -> Result<FilterBank> {
    if n_filt == 0 {
        return Err(Error::invalid("n_filt must be >= 1"));
    }
    if nfft < 2 {
        return Err(Error::invalid("nfft must be >= 2"));
    }
    if sample_rate_hz == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(Error::invalid(format!(
            "need 0 <= fmin < fmax <= {nyquist}, got fmin={fmin}, fmax={fmax}"
        )));
    }
    let mel_lo = hz_to_mel(fmin)?;
    let mel_hi = hz_to_mel(fmax)?;
    let step = (mel_hi - mel_lo) / (n_filt + 1) as f64;
    let to_bin = |hz: f64| hz * nfft as f64 / f64::from(sample_rate_hz);
    let mut points = (0..n_filt + 2)
        .map(|k| Ok(to_bin(mel_to_hz(mel_lo + step * k as f64)?)))
        .collect::<Result<Vec<f64>>>()?;
    // the mel round trip is inexact; pin the outer edges
    points[0] = to_bin(fmin);
    points[n_filt + 1] = to_bin(fmax);

    let n_bins = nfft / 2 + 1;
    let mut weights = Matrix::zeros(n_filt, n_bins);
    for i in 0..n_filt {
        let (lo, mid, hi) = (points[i], points[i + 1], points[i + 2]);
        let row = weights.row_mut(i);
        for (j, w) in row.iter_mut().enumerate() {
            let b = j as f64;
            *w = if b > lo && b <= mid {
                (b - lo) / (mid - lo)
            } else if b > mid && b < hi {
                (hi - b) / (hi - mid)
            } else {
                0.0
            };
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::DegenerateFilter { index: i, nfft });
        }
        row.iter_mut().for_each(|w| *w /= peak);
    }
    FilterBank::new(weights, nfft, sample_rate_hz, Provenance::TriangularInit)
}
