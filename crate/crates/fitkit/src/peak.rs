//! Model-free full width at half maximum.

use crate::data::{CurveData, YKind};
use crate::error::{FitError, Result};

/// Median of the outer 10 % of the samples (5 % on each side).
pub fn edge_background(y: &[f64]) -> f64 {
    let n = y.len();
    let k = ((n as f64 * 0.05).round() as usize).max(1).min(n / 2).max(1);
    let mut v: Vec<f64> = y[..k].iter().chain(&y[n - k..]).copied().collect();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Width between the half-maximum crossings around the global maximum,
/// after subtracting the edge background; crossings are interpolated
/// linearly between samples. Complex samples are reduced to `|y|²`.
pub fn fwhm(curve: &CurveData) -> Result<f64> {
    let y: Vec<f64> = match curve.kind {
        YKind::ComplexS21 => curve.y.iter().map(|v| v.norm_sqr()).collect(),
        _ => curve.real_values(),
    };
    fwhm_of(&curve.x, &y)
}

pub fn fwhm_of(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(FitError::InvalidData("need at least three matching samples".into()));
    }
    let bg = edge_background(y);
    let (imax, ymax) = y.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    let height = ymax - bg;
    if !(height > 0.0) {
        return Err(FitError::InvalidData("no peak above the background".into()));
    }
    let half = bg + 0.5 * height;
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=imax).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i)).ok_or(FitError::OpenPeak("left"))?;
    let right =
        (imax..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1)).ok_or(FitError::OpenPeak("right"))?;
    Ok(right - left)
}
