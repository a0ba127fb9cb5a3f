//! Savitzky-Golay smoothing of filter bank rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::melbank::{FilterBank, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    /// Reflect about the edge sample without repeating it: `x[-k] = x[k]`.
    #[default]
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolSpec {
    pub window_len: usize,
    pub poly_order: usize,
    #[serde(default)]
    pub edge_mode: EdgeMode,
}

impl Default for SavGolSpec {
    fn default() -> Self {
        Self {
            window_len: 9,
            poly_order: 3,
            edge_mode: EdgeMode::Mirror,
        }
    }
}

impl SavGolSpec {
    pub fn new(window_len: usize, poly_order: usize) -> Result<Self> {
        let spec = Self {
            window_len,
            poly_order,
            edge_mode: EdgeMode::Mirror,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "window length must be odd and positive, got {}",
                self.window_len
            )));
        }
        if self.poly_order >= self.window_len {
            return Err(Error::invalid(format!(
                "polynomial order {} must be below window length {}",
                self.poly_order, self.window_len
            )));
        }
        Ok(())
    }
}

/// Anything that can smooth one filter row in place of Savitzky-Golay.
pub trait RowSmoother {
    fn smooth_row(&self, row: &[f64]) -> Result<Vec<f64>>;
}

impl RowSmoother for SavGolSpec {
    fn smooth_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let kernel = savgol_kernel(self)?;
        if row.len() < self.window_len {
            return Err(Error::invalid(format!(
                "row has {} samples, fewer than the window length {}",
                row.len(),
                self.window_len
            )));
        }
        Ok(convolve_mirror(row, &kernel))
    }
}

/// Center-point smoothing coefficients of the least-squares polynomial fit,
/// from the normal equations `(AᵀA) y = e₀` of the window's Vandermonde
/// matrix `A`.
pub fn savgol_kernel(spec: &SavGolSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let half = (spec.window_len / 2) as i64;
    let cols = spec.poly_order + 1;
    let xs: Vec<f64> = (-half..=half).map(|x| x as f64).collect();

    let mut normal = vec![vec![0.0; cols + 1]; cols];
    for (r, row) in normal.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().take(cols).enumerate() {
            *cell = xs.iter().map(|x| x.powi((r + c) as i32)).sum();
        }
        row[cols] = if r == 0 { 1.0 } else { 0.0 };
    }
    let y = solve_augmented(normal)
        .ok_or_else(|| Error::invalid("singular normal equations"))?;

    Ok(xs
        .iter()
        .map(|x| y.iter().enumerate().map(|(p, yp)| yp * x.powi(p as i32)).sum())
        .collect())
}

// Gauss-Jordan elimination with partial pivoting on an n × (n+1) system.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= p);
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    for k in col..=n {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n]).collect())
}

fn convolve_mirror(row: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = row.len() as i64;
    let half = (kernel.len() / 2) as i64;
    let at = |i: i64| -> f64 {
        let mut i = i;
        // reflect until inside; one pass suffices when n > half
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        row[i.clamp(0, n - 1) as usize]
    };
    (0..n)
        .map(|k| {
            kernel
                .iter()
                .enumerate()
                .map(|(m, c)| c * at(k + m as i64 - half))
                .sum()
        })
        .collect()
}

/// Smooths every row with the Savitzky-Golay kernel; provenance becomes
/// [`Provenance::Smoothed`].
pub fn smooth_filterbank(fb: &FilterBank, spec: &SavGolSpec) -> Result<FilterBank> {
    smooth_filterbank_with(fb, spec)
}

pub fn smooth_filterbank_with(fb: &FilterBank, smoother: &impl RowSmoother) -> Result<FilterBank> {
    let rows = fb
        .weights()
        .iter_rows()
        .map(|r| smoother.smooth_row(r))
        .collect::<Result<Vec<_>>>()?;
    let weights = Matrix::from_rows(&rows).expect("rows keep their length");
    fb.with_weights(weights, Provenance::Smoothed)
}

/// Replaces negative weights with zero.
pub fn clip_negative(fb: &FilterBank) -> FilterBank {
    let mut w = fb.weights().clone();
    w.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    fb.with_weights(w, fb.provenance()).expect("same shape")
}

/// Sum of absolute first differences.
pub fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
