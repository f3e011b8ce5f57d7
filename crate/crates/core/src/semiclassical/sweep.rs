//! Pump sweeps of the mean-field steady state.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{device, ModelParams};
use crate::semiclassical::estimates::{lasing_threshold, optimal_pump_heuristic};
use crate::semiclassical::meanfield::{mean_field_steady_with, MeanField, MeanFieldOptions, MeanFieldSteady};
use crate::semiclassical::state::SemiclassicalState;

/// Mean-field steady state at pump `omega` (MHz) from the documented seed.
pub fn steady_at_pump(p: &ModelParams, omega: f64) -> Result<MeanFieldSteady> {
    let q = ModelParams { omega_pump: omega, ..p.clone() };
    mean_field_steady_with(&q, &SemiclassicalState::seed(), &MeanFieldOptions::default())
}

/// `N_pn` for each pump value, solved in parallel.
pub fn pump_sweep(p: &ModelParams, omegas: &[f64]) -> Result<Vec<MeanFieldSteady>> {
    omegas.par_iter().map(|&w| steady_at_pump(p, w)).collect()
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn growth_at(p: &ModelParams, omega: f64) -> Result<f64> {
    let mf = MeanField::new(&ModelParams { omega_pump: omega, ..p.clone() })?;
    Ok(mf.growth_rate(&mf.non_lasing_state()?))
}

/// Lowest pump in `[lo, hi]` at which small fields grow. Strong pumping
/// quenches the gain again, so the first growing point of a log grid
/// brackets the onset, which bisection on the sign of the linear growth
/// rate then resolves. `None` when no grid point grows or the field
/// already grows at `lo`.
pub fn lasing_onset(p: &ModelParams, lo: f64, hi: f64) -> Result<Option<f64>> {
    if growth_at(p, lo)? > 0.0 {
        return Ok(None);
    }
    let mut a = lo;
    let mut b = None;
    for x in log_space(lo, hi, ONSET_SCAN_POINTS).into_iter().skip(1) {
        if growth_at(p, x)? > 0.0 {
            b = Some(x);
            break;
        }
        a = x;
    }
    let Some(mut b) = b else { return Ok(None) };
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if growth_at(p, m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-9 * b {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

const ONSET_SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PumpSearch {
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub points: usize,
    /// Relative width at which golden-section refinement stops.
    pub rel_tol: f64,
}

impl Default for PumpSearch {
    fn default() -> Self {
        Self { lo_factor: 0.3, hi_factor: 30.0, points: 60, rel_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPump {
    pub lasing: bool,
    /// MHz.
    pub omega_opt: f64,
    pub n_pn_max: f64,
    /// `2 g √N_pn` at the optimum (MHz).
    pub heuristic_omega: f64,
    /// `|Ω_opt/2 − g√N_pn| / (Ω_opt/2)`.
    pub heuristic_deviation: f64,
    pub omega_threshold: f64,
    /// Coarse sweep as `(Ω, N_pn)`.
    pub sweep: Vec<(f64, f64)>,
    pub reference_numerical: f64,
    pub reference_measured: f64,
}

/// Pump maximizing the mean-field phonon number: a log-spaced sweep around
/// the threshold followed by golden-section refinement.
pub fn optimal_pump(p: &ModelParams) -> Result<OptimalPump> {
    optimal_pump_with(p, &PumpSearch::default())
}

pub fn optimal_pump_with(p: &ModelParams, search: &PumpSearch) -> Result<OptimalPump> {
    if !(p.gamma_fe > p.gamma_eg) {
        return Err(Error::NoInversion { gamma_fe: p.gamma_fe, gamma_eg: p.gamma_eg });
    }
    let th = lasing_threshold(p);
    let omegas = log_space(search.lo_factor * th, search.hi_factor * th, search.points.max(3));
    let results = pump_sweep(p, &omegas)?;
    let sweep: Vec<(f64, f64)> = omegas.iter().zip(&results).map(|(&w, r)| (w, r.n_pn)).collect();
    let (best, &(_, n_best)) = sweep
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("sweep is non-empty");
    let base = OptimalPump {
        lasing: false,
        omega_opt: f64::NAN,
        n_pn_max: 0.0,
        heuristic_omega: f64::NAN,
        heuristic_deviation: f64::NAN,
        omega_threshold: th,
        sweep: sweep.clone(),
        reference_numerical: device::OMEGA_OPTIMAL_NUMERICAL,
        reference_measured: device::OMEGA_OPTIMAL_MEASURED,
    };
    if n_best <= 0.0 {
        return Ok(base);
    }
    // Golden section on log Ω over the bracketing neighbours.
    let lo = omegas[best.saturating_sub(1)].ln();
    let hi = omegas[(best + 1).min(omegas.len() - 1)].ln();
    let f = |x: f64| steady_at_pump(p, x.exp()).map(|r| r.n_pn);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > search.rel_tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let (x_opt, n_opt) = if fc > fd { (c, fc) } else { (d, fd) };
    let (omega_opt, n_pn_max) = if n_opt >= n_best { (x_opt.exp(), n_opt) } else { (omegas[best], n_best) };
    let heuristic_omega = optimal_pump_heuristic(p.g, n_pn_max);
    Ok(OptimalPump {
        lasing: true,
        omega_opt,
        n_pn_max,
        heuristic_omega,
        heuristic_deviation: (omega_opt / 2.0 - p.g * n_pn_max.sqrt()).abs() / (omega_opt / 2.0),
        ..base
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1.0, 100.0, 3);
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn no_lasing_without_inversion_capability() {
        let p = ModelParams { gamma_fe: 30.0, ..Default::default() };
        assert!(matches!(optimal_pump(&p), Err(Error::NoInversion { .. })));
    }

    #[test]
    fn flat_landscape_reports_no_lasing() {
        // Losses far above the available gain.
        let p = ModelParams { kappa: 50.0, ..Default::default() };
        let r = optimal_pump_with(&p, &PumpSearch { points: 8, ..Default::default() }).unwrap();
        assert!(!r.lasing && r.n_pn_max == 0.0);
    }
}
