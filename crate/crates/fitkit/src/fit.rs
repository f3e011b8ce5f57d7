//! `fit_curve`: least-squares fits of the line-shape models to sampled data.
//!
//! Complex S21 is fitted on stacked real and imaginary residuals. A notch
//! model fitted to |S21|² samples compares `|S21|²` and so loses the phase
//! information.

use serde::{Deserialize, Serialize};

use crate::data::{CurveData, YKind};
use crate::error::{FitError, Result};
use crate::lm::{levenberg_marquardt, LmOptions, Problem};
use crate::models::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn for_model(model: Model) -> Self {
        let (lower, upper) = model.default_bounds();
        Self { lower, upper }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub lm: LmOptions,
    /// Fixed-parameter mask; `None` uses the model default.
    pub fixed: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// `√(diag (JᵀJ)⁻¹ · ‖r‖²/(m − p))`; zero for fixed parameters.
    pub stderr: Vec<f64>,
    pub fixed: Vec<bool>,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub message: String,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.stderr[i])
    }
}

/// Per-parameter scale used for finite differences and relative steps:
/// the frequency span for positions, the sample magnitude for amplitudes,
/// and the initial magnitude otherwise.
fn scales(model: Model, data: &CurveData, init: &[f64]) -> Vec<f64> {
    let span = data.x[data.len() - 1] - data.x[0];
    let ymax = data.y.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    model
        .param_names()
        .iter()
        .zip(init)
        .map(|(name, v)| match *name {
            "f0" | "center" => span.max(v.abs() * 1e-12),
            "amplitude" | "background" => ymax,
            _ => v.abs().max(1e-12 * span),
        })
        .collect()
}

pub fn fit_curve(model: Model, data: &CurveData, init: &[f64], bounds: &Bounds) -> Result<FitResult> {
    fit_curve_with(model, data, init, bounds, &FitOptions::default())
}

pub fn fit_curve_with(
    model: Model,
    data: &CurveData,
    init: &[f64],
    bounds: &Bounds,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !model.accepts(data.kind) {
        return Err(FitError::InvalidData(format!("{model} cannot be fitted to {:?} samples", data.kind)));
    }
    let n = model.param_names().len();
    if init.len() != n {
        return Err(FitError::InvalidData(format!("{model} takes {n} parameters, got {}", init.len())));
    }
    let fixed = opts.fixed.clone().unwrap_or_else(|| model.default_fixed());
    let residual = |p: &[f64]| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * data.len());
        let mut im = Vec::new();
        for (&f, &y) in data.x.iter().zip(&data.y) {
            let v = model.eval(f, p).ok()?;
            match data.kind {
                YKind::ComplexS21 => {
                    out.push(v.re - y.re);
                    im.push(v.im - y.im);
                }
                YKind::MagnitudeSquared if model.is_complex() => out.push(v.norm_sqr() - y.re),
                _ => out.push(v.re - y.re),
            }
        }
        out.extend(im);
        Some(out)
    };
    let problem = Problem {
        residual: &residual,
        names: model.param_names().iter().map(|s| s.to_string()).collect(),
        lower: bounds.lower.clone(),
        upper: bounds.upper.clone(),
        fixed: fixed.clone(),
        scales: scales(model, data, init),
    };
    let out = levenberg_marquardt(&problem, init, &opts.lm)?;
    Ok(FitResult {
        model,
        names: problem.names,
        params: out.x,
        stderr: out.stderr,
        fixed,
        residual_norm: out.residual_norm,
        gradient_norm: out.gradient_norm,
        converged: out.converged,
        iterations: out.iterations,
        evaluations: out.evaluations,
        message: out.message,
    })
}
