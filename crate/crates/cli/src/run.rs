//! Experiment dispatch.
//!
//! Every experiment maps a validated [`RunSpec`] to a [`GridResult`]. Cells
//! along a parameter axis are independent and solved in parallel; results
//! are collected in axis order, so the output does not depend on the
//! number of worker threads.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use saser_core::lindblad::density::{HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
use saser_core::lindblad::steady::{PIVOT_RATIO_TOL, RESIDUAL_TOL};
use saser_core::lindblad::{
    phonon_correlation, probe_transmission_with, solve_steady, Correlation, DensityMatrix, ProbeOptions,
    SpectrumOptions, SteadySummary, SuperOperator,
};
use saser_core::params::device;
use saser_core::semiclassical::{
    lasing_onset, lasing_threshold, linewidth_estimate, mean_field_steady_with, optimal_pump, optimal_pump_heuristic,
    phonon_number_estimate, purcell_kappa, rate_balance_residual, MeanFieldOptions, MeanFieldSteady, Populations,
    SemiclassicalState,
};
use saser_core::ModelParams;
use saser_fitkit::{fit_curve, fwhm_of, Bounds, CurveData, FitResult, FreqUnit, Model, YKind};
use serde_json::{json, Value};

use crate::config::{Experiment, RunSpec};
use crate::error::{CliError, Result};
use crate::output::{number, AxisValues, Column, GridResult, Provenance};

/// Relative change of `⟨b†b⟩` under a 25% larger cutoff below which a cell
/// counts as converged.
pub const CUTOFF_TOLERANCE: f64 = 0.01;
/// Relative change of `t` when the probe amplitude is halved.
pub const LINEARITY_TOLERANCE: f64 = 0.01;

pub fn run_experiment(spec: &RunSpec) -> Result<GridResult> {
    spec.validate(rayon::current_num_threads())?;
    let r = match spec.experiment {
        Experiment::RabiMap | Experiment::HotspotMap => probe_map(spec)?,
        Experiment::GainProfile => gain_profile(spec)?,
        Experiment::EmissionMap => emission_map(spec)?,
        Experiment::EmissionSpectrum => emission_spectrum(spec)?,
        Experiment::PumpSweep => pump_sweep(spec)?,
        Experiment::EstimatesReport => estimates_report(spec)?,
    };
    r.check_shape().map_err(CliError::NonConvergence)?;
    Ok(r)
}

fn tolerances(spec: &RunSpec) -> BTreeMap<String, f64> {
    let o = &spec.options;
    let mut t = BTreeMap::new();
    if spec.solver().full_quantum() {
        t.insert("steady_pivot_ratio".into(), PIVOT_RATIO_TOL);
        t.insert("steady_residual".into(), RESIDUAL_TOL);
        t.insert("density_hermiticity".into(), HERMITICITY_TOL);
        t.insert("density_trace".into(), TRACE_TOL);
        t.insert("density_positivity".into(), POSITIVITY_TOL);
        t.insert("memory_budget_mb".into(), o.memory_budget_mb);
        if o.cutoff_check {
            t.insert("cutoff_convergence".into(), CUTOFF_TOLERANCE);
        }
    }
    match spec.experiment {
        Experiment::RabiMap | Experiment::HotspotMap | Experiment::GainProfile => {
            t.insert("probe_linearity".into(), LINEARITY_TOLERANCE);
        }
        Experiment::EmissionMap | Experiment::EmissionSpectrum => {
            t.insert("spectrum_tail".into(), o.spectrum_tail_tolerance);
        }
        Experiment::PumpSweep | Experiment::EstimatesReport => {
            if spec.solver().semiclassical() {
                t.insert("mean_field_residual".into(), o.mean_field_tolerance);
            }
            if spec.solver().full_quantum() && o.sweep_linewidth {
                t.insert("spectrum_tail".into(), o.spectrum_tail_tolerance);
            }
        }
    }
    if spec.experiment == Experiment::EmissionSpectrum && o.fit_voigt {
        let lm = saser_fitkit::LmOptions::default();
        t.insert("fit_xtol".into(), lm.xtol);
        t.insert("fit_gtol".into(), lm.gtol);
    }
    t
}

fn axis_unit(name: &str) -> &'static str {
    match name {
        "fock_cutoff" => "1",
        _ => "MHz",
    }
}

fn axis_values(spec: &RunSpec) -> Vec<AxisValues> {
    spec.axes
        .iter()
        .map(|a| AxisValues { name: a.name.clone(), unit: axis_unit(&a.name).into(), values: a.values() })
        .collect()
}

fn cols(list: &[(&str, &str)]) -> Vec<Column> {
    list.iter().map(|(n, u)| Column::new(n, u)).collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Parameters of each cell along the first (parameter) axis.
fn param_cells(spec: &RunSpec) -> Result<Vec<ModelParams>> {
    let axis = &spec.axes[0];
    axis.values().iter().map(|&v| spec.cell_params(&[(axis.name.as_str(), v)])).collect()
}

fn cell_error(axis: &str, value: f64, e: CliError) -> CliError {
    match e {
        CliError::NonConvergence(m) => CliError::NonConvergence(format!("cell {axis} = {value}: {m}")),
        CliError::Validation(v) => CliError::Validation(v.into_iter().map(|m| format!("cell {axis} = {value}: {m}")).collect()),
        other => other,
    }
}

/// Full-quantum steady state of one cell with its diagnostics.
struct SteadyCell {
    l: SuperOperator,
    rho: DensityMatrix,
    summary: SteadySummary,
    balance: f64,
    hermiticity: f64,
    trace_error: f64,
    min_eigenvalue: f64,
    /// `None` when the check is disabled.
    cutoff_change: Option<f64>,
}

impl SteadyCell {
    fn solve(p: &ModelParams, cutoff_check: bool) -> Result<Self> {
        let (l, rho) = solve_steady(p)?;
        let summary = SteadySummary::of(&rho)?;
        let pop = Populations { g: summary.pop_g, e: summary.pop_e, f: summary.pop_f };
        let balance = rate_balance_residual(&pop, summary.n_mean, p);
        let cutoff_change = if cutoff_check {
            let larger = crate::guard::checked_cutoff(p.fock_cutoff);
            let (_, rho2) = solve_steady(&ModelParams { fock_cutoff: larger, ..p.clone() })?;
            let n2 = SteadySummary::of(&rho2)?.n_mean;
            let diff = (n2 - summary.n_mean).abs();
            Some(if diff < 1e-9 { 0.0 } else { diff / n2.abs().max(1e-12) })
        } else {
            None
        };
        Ok(Self {
            hermiticity: rho.hermiticity_error(),
            trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue: rho.min_eigenvalue(),
            l,
            rho,
            summary,
            balance,
            cutoff_change,
        })
    }

    fn converged(&self) -> bool {
        self.cutoff_change.is_none_or(|c| c < CUTOFF_TOLERANCE)
    }
}

/// Hygiene and truncation statistics over all full-quantum cells.
#[derive(Default)]
struct Hygiene {
    cells: usize,
    hermiticity: f64,
    trace_error: f64,
    min_eigenvalue: f64,
    worst_cutoff_change: Option<f64>,
    all_converged: bool,
    top_fock_weight: f64,
}

impl Hygiene {
    fn of<'a>(cells: impl IntoIterator<Item = &'a SteadyCell>) -> Self {
        let mut h = Hygiene { min_eigenvalue: f64::INFINITY, all_converged: true, ..Default::default() };
        for c in cells {
            h.cells += 1;
            h.hermiticity = h.hermiticity.max(c.hermiticity);
            h.trace_error = h.trace_error.max(c.trace_error);
            h.min_eigenvalue = h.min_eigenvalue.min(c.min_eigenvalue);
            h.top_fock_weight = h.top_fock_weight.max(c.summary.top_fock_weight);
            if let Some(ch) = c.cutoff_change {
                h.worst_cutoff_change = Some(h.worst_cutoff_change.unwrap_or(0.0).max(ch));
            }
            h.all_converged &= c.converged();
        }
        h
    }

    fn ok(&self) -> bool {
        self.hermiticity <= HERMITICITY_TOL && self.trace_error <= TRACE_TOL && self.min_eigenvalue >= -POSITIVITY_TOL
    }

    fn write(&self, summary: &mut BTreeMap<String, Value>, warnings: &mut Vec<String>) {
        summary.insert("hygiene_max_hermiticity_error".into(), number(self.hermiticity));
        summary.insert("hygiene_max_trace_error".into(), number(self.trace_error));
        summary.insert("hygiene_min_eigenvalue".into(), number(self.min_eigenvalue));
        summary.insert("hygiene_ok".into(), json!(self.ok()));
        summary.insert("max_top_fock_weight".into(), number(self.top_fock_weight));
        summary.insert("cutoff_converged".into(), json!(self.all_converged));
        if let Some(w) = self.worst_cutoff_change {
            summary.insert("max_cutoff_change".into(), number(w));
        }
        if !self.all_converged {
            warnings.push(format!(
                "cutoff not converged: raising fock_cutoff by 25% changes <n> by up to {:.2}%",
                100.0 * self.worst_cutoff_change.unwrap_or(f64::NAN)
            ));
        }
    }
}

// ---------------------------------------------------------------- probe --

fn probe_options(spec: &RunSpec) -> ProbeOptions {
    ProbeOptions { check_points: spec.options.linearity_checks, ..ProbeOptions::default() }
}

fn probe_map(spec: &RunSpec) -> Result<GridResult> {
    let pump_off = spec.experiment == Experiment::RabiMap;
    let mut warnings = Vec::new();
    if pump_off && spec.params.omega_pump != 0.0 {
        warnings.push(format!("rabi_map runs with the pump off; omega_pump = {} is ignored", spec.params.omega_pump));
    }
    if !pump_off && spec.params.omega_pump == 0.0 && spec.axes[0].name != "omega_pump" {
        warnings.push("hotspot_map with omega_pump = 0 is a pump-off map".into());
    }
    let axis = spec.axes[0].name.clone();
    let outer = spec.axes[0].values();
    let probe = spec.axes[1].values();
    let opts = probe_options(spec);
    let results: Vec<_> = param_cells(spec)?
        .into_par_iter()
        .zip(outer.par_iter())
        .map(|(mut p, &v)| {
            if pump_off {
                p.omega_pump = 0.0;
            }
            let go = || -> Result<_> {
                let cell = SteadyCell::solve(&p, spec.options.cutoff_check)?;
                let scan = probe_transmission_with(&p, &probe, &opts)?;
                Ok((cell, scan))
            };
            go().map_err(|e| cell_error(&axis, v, e))
        })
        .collect::<Result<_>>()?;

    let columns = cols(&[
        ("t_re", "1"),
        ("t_im", "1"),
        ("abs_t", "1"),
        ("n_mean", "phonons"),
        ("cutoff_converged", "bool"),
        ("linearity_deviation", "1"),
    ]);
    let mut cells = Vec::with_capacity(outer.len() * probe.len());
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut worst_linearity: f64 = 0.0;
    for (&v, (cell, scan)) in outer.iter().zip(&results) {
        let lin = scan.linearity_deviation.unwrap_or(f64::NAN);
        worst_linearity = worst_linearity.max(scan.linearity_deviation.unwrap_or(0.0));
        for w in &scan.warnings {
            warnings.push(format!("cell {axis} = {v}: {w}"));
        }
        for (&dp, t) in probe.iter().zip(&scan.t) {
            if t.norm() > best.0 {
                best = (t.norm(), v, dp);
            }
            cells.push(vec![t.re, t.im, t.norm(), cell.summary.n_mean, flag(cell.converged()), lin]);
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("max_abs_t".into(), number(best.0));
    summary.insert(format!("max_abs_t_{axis}"), number(best.1));
    summary.insert("max_abs_t_probe_detuning".into(), number(best.2));
    summary.insert("max_linearity_deviation".into(), number(worst_linearity));
    summary.insert("s21_scale".into(), number(results.first().map(|r| r.1.s21_scale).unwrap_or(f64::NAN)));
    Hygiene::of(results.iter().map(|r| &r.0)).write(&mut summary, &mut warnings);
    Ok(GridResult {
        axes: axis_values(spec),
        columns,
        cells,
        summary,
        warnings,
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

fn gain_profile(spec: &RunSpec) -> Result<GridResult> {
    let probe = spec.axes[0].values();
    let opts = probe_options(spec);
    let on = spec.cell_params(&[])?;
    let off = ModelParams { omega_pump: 0.0, ..on.clone() };
    let mut warnings = Vec::new();
    if on.omega_pump == 0.0 {
        warnings.push("gain_profile with omega_pump = 0 compares the pump-off response with itself".into());
    }
    let solved: Vec<_> = [&on, &off]
        .par_iter()
        .map(|p| -> Result<_> {
            let cell = SteadyCell::solve(p, spec.options.cutoff_check)?;
            let scan = probe_transmission_with(p, &probe, &opts)?;
            Ok((cell, scan))
        })
        .collect::<Result<_>>()?;
    let (cell_on, scan_on) = &solved[0];
    let (cell_off, scan_off) = &solved[1];
    for (label, scan) in [("pump on", scan_on), ("pump off", scan_off)] {
        for w in &scan.warnings {
            warnings.push(format!("{label}: {w}"));
        }
    }
    let columns = cols(&[
        ("t_on_re", "1"),
        ("t_on_im", "1"),
        ("abs_t_on", "1"),
        ("t_off_re", "1"),
        ("t_off_im", "1"),
        ("abs_t_off", "1"),
        ("gain", "1"),
    ]);
    let cells: Vec<Vec<f64>> = scan_on
        .t
        .iter()
        .zip(&scan_off.t)
        .map(|(a, b)| vec![a.re, a.im, a.norm(), b.re, b.im, b.norm(), a.norm() / b.norm()])
        .collect();
    let imax = (0..cells.len()).max_by(|&a, &b| cells[a][2].total_cmp(&cells[b][2])).unwrap_or(0);
    let gmax = (0..cells.len()).max_by(|&a, &b| cells[a][6].total_cmp(&cells[b][6])).unwrap_or(0);
    let mut summary = BTreeMap::new();
    summary.insert("hot_spot_probe_detuning".into(), number(probe[imax]));
    summary.insert("hot_spot_abs_t_on".into(), number(cells[imax][2]));
    summary.insert("hot_spot_abs_t_off".into(), number(cells[imax][5]));
    summary.insert("hot_spot_gain".into(), number(cells[imax][6]));
    summary.insert("max_gain".into(), number(cells[gmax][6]));
    summary.insert("max_gain_probe_detuning".into(), number(probe[gmax]));
    summary.insert("amplifies".into(), json!(cells[imax][2] > 1.0 && cells[imax][5] < 1.0));
    summary.insert("n_mean_pump_on".into(), number(cell_on.summary.n_mean));
    summary.insert("n_mean_pump_off".into(), number(cell_off.summary.n_mean));
    let lin = [scan_on, scan_off].iter().filter_map(|s| s.linearity_deviation).fold(0.0, f64::max);
    summary.insert("max_linearity_deviation".into(), number(lin));
    Hygiene::of([cell_on, cell_off]).write(&mut summary, &mut warnings);
    Ok(GridResult {
        axes: axis_values(spec),
        columns,
        cells,
        summary,
        warnings,
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

// ------------------------------------------------------------- emission --

fn spectrum_options(spec: &RunSpec) -> SpectrumOptions {
    SpectrumOptions { tail_tolerance: spec.options.spectrum_tail_tolerance, ..SpectrumOptions::default() }
}

/// `∫ S df` on the natural grid of the correlation. This is the full
/// integral, not limited to an output window.
fn natural_integral(corr: &Correlation) -> f64 {
    let (grid, psd) = corr.transform_natural();
    let df = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    psd.iter().map(|s| s.max(0.0)).sum::<f64>() * df
}

/// FWHM of the regression spectrum: located on the natural grid, then
/// resolved on a fine grid of ±8 rough widths around the peak.
pub fn regression_linewidth(corr: &Correlation) -> Result<(f64, f64)> {
    let (grid, psd) = corr.transform_natural();
    let df = grid[1] - grid[0];
    let imax = (0..psd.len()).max_by(|&a, &b| psd[a].total_cmp(&psd[b])).unwrap_or(0);
    let rough = fwhm_of(&grid, &psd).unwrap_or(df).max(2.0 * df);
    let half = 8.0 * rough;
    let n = 801;
    let fine: Vec<f64> = (0..n).map(|i| grid[imax] - half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
    let s = corr.transform(&fine);
    let w = fwhm_of(&fine, &s)?;
    let peak = (0..n).max_by(|&a, &b| s[a].total_cmp(&s[b])).map(|i| fine[i]).unwrap_or(f64::NAN);
    Ok((w, peak))
}

struct EmissionCell {
    steady: SteadyCell,
    corr: Correlation,
    psd: Vec<f64>,
    max_clip: f64,
}

fn emission_cell(p: &ModelParams, freqs: &[f64], spec: &RunSpec) -> Result<EmissionCell> {
    let steady = SteadyCell::solve(p, spec.options.cutoff_check)?;
    let corr = phonon_correlation(&steady.l, &steady.rho, &spectrum_options(spec))?;
    let raw = corr.transform(freqs);
    let max_clip = raw.iter().map(|&s| (-s).max(0.0)).fold(0.0, f64::max);
    let psd = raw.into_iter().map(|s| s.max(0.0)).collect();
    Ok(EmissionCell { steady, corr, psd, max_clip })
}

/// `(1/n)∫S df − 1` when the state holds phonons.
fn sum_rule_error(corr: &Correlation, n_mean: f64) -> f64 {
    if n_mean > 1e-12 {
        natural_integral(corr) / n_mean - 1.0
    } else {
        f64::NAN
    }
}

fn spectrum_warnings(cell: &EmissionCell, label: &str, warnings: &mut Vec<String>) {
    if !cell.corr.decayed {
        warnings.push(format!(
            "{label}correlation not decayed within {:.3} us: tail {:.2e} of G(0)",
            cell.corr.horizon(),
            cell.corr.tail
        ));
    }
}

fn emission_map(spec: &RunSpec) -> Result<GridResult> {
    let axis = spec.axes[0].name.clone();
    let outer = spec.axes[0].values();
    let freqs = spec.axes[1].values();
    let results: Vec<EmissionCell> = param_cells(spec)?
        .into_par_iter()
        .zip(outer.par_iter())
        .map(|(p, &v)| emission_cell(&p, &freqs, spec).map_err(|e| cell_error(&axis, v, e)))
        .collect::<Result<_>>()?;
    let columns = cols(&[
        ("psd", "phonons/MHz"),
        ("n_mean", "phonons"),
        ("peak_frequency", "MHz"),
        ("sum_rule_error", "1"),
        ("decayed", "bool"),
        ("cutoff_converged", "bool"),
    ]);
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut worst_sum: f64 = 0.0;
    let mut max_clip: f64 = 0.0;
    for (&v, c) in outer.iter().zip(&results) {
        spectrum_warnings(c, &format!("cell {axis} = {v}: "), &mut warnings);
        let sr = sum_rule_error(&c.corr, c.steady.summary.n_mean);
        if c.corr.decayed && sr.is_finite() {
            worst_sum = worst_sum.max(sr.abs());
        }
        max_clip = max_clip.max(c.max_clip);
        let imax = (0..freqs.len()).max_by(|&a, &b| c.psd[a].total_cmp(&c.psd[b])).unwrap_or(0);
        for &s in &c.psd {
            cells.push(vec![
                s,
                c.steady.summary.n_mean,
                freqs[imax],
                sr,
                flag(c.corr.decayed),
                flag(c.steady.converged()),
            ]);
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("max_sum_rule_error".into(), number(worst_sum));
    summary.insert("max_clip".into(), number(max_clip));
    summary.insert("all_decayed".into(), json!(results.iter().all(|c| c.corr.decayed)));
    Hygiene::of(results.iter().map(|c| &c.steady)).write(&mut summary, &mut warnings);
    Ok(GridResult {
        axes: axis_values(spec),
        columns,
        cells,
        summary,
        warnings,
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

fn fit_json(fit: &FitResult) -> Value {
    let params: serde_json::Map<String, Value> =
        fit.names.iter().zip(&fit.params).map(|(n, v)| (n.clone(), number(*v))).collect();
    let stderr: serde_json::Map<String, Value> =
        fit.names.iter().zip(&fit.stderr).map(|(n, v)| (n.clone(), number(*v))).collect();
    json!({
        "model": fit.model.id(),
        "params": params,
        "stderr": stderr,
        "residual_norm": number(fit.residual_norm),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "message": fit.message,
    })
}

fn emission_spectrum(spec: &RunSpec) -> Result<GridResult> {
    let p = spec.cell_params(&[])?;
    let freqs = spec.axes[0].values();
    let cell = emission_cell(&p, &freqs, spec)?;
    let n = cell.steady.summary.n_mean;
    let mut warnings = Vec::new();
    spectrum_warnings(&cell, "", &mut warnings);
    let mut summary = BTreeMap::new();
    summary.insert("n_mean".into(), number(n));
    summary.insert("kappa".into(), number(p.kappa));
    summary.insert("decayed".into(), json!(cell.corr.decayed));
    summary.insert("correlation_tail".into(), number(cell.corr.tail));
    summary.insert("correlation_horizon_us".into(), number(cell.corr.horizon()));
    summary.insert("max_clip".into(), number(cell.max_clip));
    summary.insert("sum_rule_error".into(), number(sum_rule_error(&cell.corr, n)));
    let window: f64 = freqs.windows(2).zip(cell.psd.windows(2)).map(|(f, s)| 0.5 * (f[1] - f[0]) * (s[0] + s[1])).sum();
    summary.insert("window_integral".into(), number(window));
    summary.insert("pop_g".into(), number(cell.steady.summary.pop_g));
    summary.insert("pop_e".into(), number(cell.steady.summary.pop_e));
    summary.insert("pop_f".into(), number(cell.steady.summary.pop_f));
    summary.insert("rate_balance_residual".into(), number(cell.steady.balance));

    match regression_linewidth(&cell.corr) {
        Ok((w, peak)) => {
            summary.insert("fwhm".into(), number(w));
            summary.insert("peak_frequency".into(), number(peak));
            summary.insert("narrowing".into(), number(p.kappa / w));
        }
        Err(e) => warnings.push(format!("no FWHM: {e}")),
    }
    if n > 0.0 {
        let (guide, st) = linewidth_estimate(n, p.kappa)?;
        summary.insert("fwhm_guide".into(), number(guide));
        summary.insert("fwhm_schawlow_townes".into(), number(st));
    }
    match fwhm_of(&freqs, &cell.psd) {
        Ok(w) => {
            summary.insert("fwhm_on_grid".into(), number(w));
        }
        Err(e) => warnings.push(format!("no FWHM on the output grid: {e}")),
    }

    let mut columns = cols(&[("psd", "phonons/MHz")]);
    let mut fit_curve_values = None;
    if spec.options.fit_voigt {
        match fit_voigt(&freqs, &cell.psd) {
            Ok(fit) => {
                let lf = fit.get("lorentz_fwhm").unwrap_or(f64::NAN);
                let gf = fit.get("gauss_fwhm").unwrap_or(f64::NAN);
                summary.insert("voigt".into(), fit_json(&fit));
                summary.insert("fwhm_voigt".into(), number(saser_fitkit::voigt_fwhm_approx(lf, gf)));
                if !fit.converged {
                    warnings.push(format!("Voigt fit did not converge: {}", fit.message));
                }
                let curve: Vec<f64> =
                    freqs.iter().map(|&f| Model::Voigt.eval(f, &fit.params).map(|v| v.re).unwrap_or(f64::NAN)).collect();
                fit_curve_values = Some(curve);
                columns.push(Column::new("voigt_fit", "phonons/MHz"));
            }
            Err(e) => warnings.push(format!("Voigt fit failed: {e}")),
        }
    }
    let cells: Vec<Vec<f64>> = (0..freqs.len())
        .map(|i| {
            let mut row = vec![cell.psd[i]];
            if let Some(c) = &fit_curve_values {
                row.push(c[i]);
            }
            row
        })
        .collect();
    Hygiene::of([&cell.steady]).write(&mut summary, &mut warnings);
    Ok(GridResult {
        axes: axis_values(spec),
        columns,
        cells,
        summary,
        warnings,
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

fn fit_voigt(freqs: &[f64], psd: &[f64]) -> Result<FitResult> {
    let data = CurveData::real(freqs.to_vec(), psd.to_vec(), YKind::Psd, FreqUnit::MHz)?;
    let init = Model::Voigt.initial_guess(&data);
    Ok(fit_curve(Model::Voigt, &data, &init, &Bounds::for_model(Model::Voigt))?)
}

// ----------------------------------------------------------- pump sweep --

fn mean_field_params(p: &ModelParams, fold: bool) -> Result<ModelParams> {
    Ok(if fold { p.with_effective_kappa()? } else { p.clone() })
}

fn mean_field_options(spec: &RunSpec) -> MeanFieldOptions {
    MeanFieldOptions { residual_tol: spec.options.mean_field_tolerance, ..MeanFieldOptions::default() }
}

struct SweepCell {
    mf: Option<(MeanFieldSteady, f64)>,
    fq: Option<(SteadyCell, Option<EmissionLine>)>,
}

struct EmissionLine {
    fwhm: f64,
    decayed: bool,
    sum_rule: f64,
}

fn sweep_cell(p: &ModelParams, spec: &RunSpec) -> Result<SweepCell> {
    let solver = spec.solver();
    let fold = spec.options.fold_purcell;
    let mf = if solver.semiclassical() {
        let q = mean_field_params(p, fold)?;
        let s = mean_field_steady_with(&q, &SemiclassicalState::seed(), &mean_field_options(spec))?;
        let balance = rate_balance_residual(&s.state.populations(), s.n_pn, &q);
        Some((s, balance))
    } else {
        None
    };
    let fq = if solver.full_quantum() {
        let q = mean_field_params(p, fold)?;
        let cell = SteadyCell::solve(&q, spec.options.cutoff_check)?;
        let line = if spec.options.sweep_linewidth && cell.summary.n_mean > 1e-6 {
            let corr = phonon_correlation(&cell.l, &cell.rho, &spectrum_options(spec))?;
            let fwhm = regression_linewidth(&corr).map(|r| r.0).unwrap_or(f64::NAN);
            Some(EmissionLine { fwhm, decayed: corr.decayed, sum_rule: sum_rule_error(&corr, cell.summary.n_mean) })
        } else {
            None
        };
        Some((cell, line))
    } else {
        None
    };
    Ok(SweepCell { mf, fq })
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / d;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / d;
    (a < 0.0).then(|| -b / (2.0 * a))
}

fn pump_sweep(spec: &RunSpec) -> Result<GridResult> {
    let axis = spec.axes[0].name.clone();
    let values = spec.axes[0].values();
    let solver = spec.solver();
    let results: Vec<SweepCell> = param_cells(spec)?
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(p, &v)| sweep_cell(&p, spec).map_err(|e| cell_error(&axis, v, e)))
        .collect::<Result<_>>()?;
    let kappa_line = spec.params.kappa;
    let mut list: Vec<(&str, &str)> = Vec::new();
    if solver.semiclassical() {
        list.extend([
            ("n_pn_mf", "phonons"),
            ("lasing_mf", "bool"),
            ("lasing_frequency_mf", "MHz"),
            ("growth_rate_mf", "MHz"),
            ("residual_mf", "1"),
            ("pop_g_mf", "1"),
            ("pop_e_mf", "1"),
            ("pop_f_mf", "1"),
            ("rate_balance_mf", "1"),
            ("fwhm_guide_khz", "kHz"),
            ("fwhm_schawlow_townes_khz", "kHz"),
        ]);
    }
    if solver.full_quantum() {
        list.extend([
            ("n_mean_fq", "phonons"),
            ("pop_g_fq", "1"),
            ("pop_e_fq", "1"),
            ("pop_f_fq", "1"),
            ("rate_balance_fq", "1"),
            ("top_fock_weight", "1"),
            ("cutoff_converged", "bool"),
            ("fwhm_fq", "MHz"),
            ("sum_rule_error_fq", "1"),
            ("decayed_fq", "bool"),
        ]);
    }
    let columns = cols(&list);
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for (&v, c) in values.iter().zip(&results) {
        let mut row = Vec::new();
        if let Some((s, balance)) = &c.mf {
            let (guide, st) =
                if s.n_pn > 0.0 { linewidth_estimate(s.n_pn, kappa_line)? } else { (f64::NAN, f64::NAN) };
            let pop = s.state.populations();
            row.extend([
                s.n_pn,
                flag(s.lasing),
                s.lasing_frequency,
                s.growth_rate,
                s.residual,
                pop.g,
                pop.e,
                pop.f,
                *balance,
                guide * 1e3,
                st * 1e3,
            ]);
        }
        if let Some((cell, line)) = &c.fq {
            let s = &cell.summary;
            row.extend([s.n_mean, s.pop_g, s.pop_e, s.pop_f, cell.balance, s.top_fock_weight, flag(cell.converged())]);
            match line {
                Some(l) => {
                    if !l.decayed {
                        warnings.push(format!("cell {axis} = {v}: correlation not decayed"));
                    }
                    row.extend([l.fwhm, l.sum_rule, flag(l.decayed)]);
                }
                None => row.extend([f64::NAN, f64::NAN, f64::NAN]),
            }
        }
        cells.push(row);
    }

    let mut summary = BTreeMap::new();
    summary.insert("kappa_linewidth".into(), number(kappa_line));
    if solver.semiclassical() {
        let n: Vec<f64> = results.iter().map(|c| c.mf.as_ref().map(|m| m.0.n_pn).unwrap_or(0.0)).collect();
        let i = (0..n.len()).max_by(|&a, &b| n[a].total_cmp(&n[b])).unwrap_or(0);
        summary.insert(format!("argmax_{axis}_mf"), number(values[i]));
        summary.insert("max_n_pn_mf".into(), number(n[i]));
        if n[i] > 0.0 && i > 0 && i + 1 < n.len() {
            let log = spec.axes[0].spacing == crate::config::Spacing::Log;
            let t = |x: f64| if log { x.ln() } else { x };
            let x = [t(values[i - 1]), t(values[i]), t(values[i + 1])];
            if let Some(xv) = parabola_vertex(x, [n[i - 1], n[i], n[i + 1]]) {
                summary.insert(format!("argmax_{axis}_mf_refined"), number(if log { xv.exp() } else { xv }));
            }
        }
        if axis == "omega_pump" {
            let q = mean_field_params(&spec.params, spec.options.fold_purcell)?;
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if let Some(onset) = lasing_onset(&q, lo, hi)? {
                summary.insert("lasing_onset_mf".into(), number(onset));
            }
            summary.insert("omega_threshold".into(), number(lasing_threshold(&q)));
            if n[i] > 0.0 {
                summary.insert("omega_opt_heuristic".into(), number(optimal_pump_heuristic(q.g, n[i])));
            }
            // The first cell that lases, as read off the grid.
            if let Some(j) = n.iter().position(|&x| x > 0.0) {
                summary.insert("first_lasing_omega_pump_mf".into(), number(values[j]));
            }
        }
        let worst_residual = results.iter().filter_map(|c| c.mf.as_ref()).map(|m| m.0.residual).fold(0.0, f64::max);
        summary.insert("max_residual_mf".into(), number(worst_residual));
    }
    if solver.full_quantum() {
        let cells_fq: Vec<&SteadyCell> = results.iter().filter_map(|c| c.fq.as_ref().map(|f| &f.0)).collect();
        let n: Vec<f64> = cells_fq.iter().map(|c| c.summary.n_mean).collect();
        let i = (0..n.len()).max_by(|&a, &b| n[a].total_cmp(&n[b])).unwrap_or(0);
        summary.insert(format!("argmax_{axis}_fq"), number(values[i]));
        summary.insert("max_n_mean_fq".into(), number(n[i]));
        Hygiene::of(cells_fq).write(&mut summary, &mut warnings);
    }
    Ok(GridResult {
        axes: axis_values(spec),
        columns,
        cells,
        summary,
        warnings,
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

// ------------------------------------------------------------ estimates --

fn estimates_report(spec: &RunSpec) -> Result<GridResult> {
    let axis = spec.axes[0].name.clone();
    let values = spec.axes[0].values();
    let numerical = spec.options.numerical_optimum;
    let fold = spec.options.fold_purcell;
    let rows: Vec<Vec<f64>> = param_cells(spec)?
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(p, &v)| {
            let go = || -> Result<Vec<f64>> {
                let n_plain = phonon_number_estimate(&p, false)?;
                let n_purcell = phonon_number_estimate(&p, true)?;
                let kp = purcell_kappa(&p)?;
                let (guide, st) = linewidth_estimate(n_purcell, p.kappa)?;
                let (guide_meas, _) = linewidth_estimate(device::N_PHONON_MAX_MEASURED, p.kappa)?;
                let mut row = vec![
                    kp,
                    p.kappa + kp,
                    n_plain,
                    n_purcell,
                    lasing_threshold(&p),
                    optimal_pump_heuristic(p.g, n_purcell),
                    guide * 1e3,
                    st * 1e3,
                    p.kappa * 1e3,
                    p.kappa / guide,
                    guide_meas * 1e3,
                    p.kappa / guide_meas,
                ];
                if numerical {
                    let q = mean_field_params(&p, fold)?;
                    let opt = optimal_pump(&q)?;
                    let th = lasing_threshold(&q);
                    let onset = lasing_onset(&q, 0.3 * th, 30.0 * th)?.unwrap_or(f64::NAN);
                    row.extend([opt.omega_opt, opt.n_pn_max, opt.heuristic_omega, opt.heuristic_deviation, onset]);
                }
                Ok(row)
            };
            go().map_err(|e| cell_error(&axis, v, e))
        })
        .collect::<Result<_>>()?;
    let mut list = vec![
        ("kappa_purcell", "MHz"),
        ("kappa_eff", "MHz"),
        ("n_pn_eq3", "phonons"),
        ("n_pn_eq3_purcell", "phonons"),
        ("omega_threshold", "MHz"),
        ("omega_opt_heuristic", "MHz"),
        ("fwhm_guide_khz", "kHz"),
        ("fwhm_schawlow_townes_khz", "kHz"),
        ("resonator_fwhm_khz", "kHz"),
        ("narrowing_guide", "1"),
        ("fwhm_guide_at_measured_n_khz", "kHz"),
        ("narrowing_at_measured_n", "1"),
    ];
    if numerical {
        list.extend([
            ("omega_opt_mf", "MHz"),
            ("n_pn_opt_mf", "phonons"),
            ("omega_opt_mf_heuristic", "MHz"),
            ("heuristic_deviation_mf", "1"),
            ("lasing_onset_mf", "MHz"),
        ]);
    }
    let mut summary = BTreeMap::new();
    summary.insert("reference_omega_opt_numerical".into(), number(device::OMEGA_OPTIMAL_NUMERICAL));
    summary.insert("reference_omega_opt_measured".into(), number(device::OMEGA_OPTIMAL_MEASURED));
    summary.insert("reference_n_pn_measured".into(), number(device::N_PHONON_MAX_MEASURED));
    summary.insert("fold_purcell".into(), json!(fold));
    Ok(GridResult {
        axes: axis_values(spec),
        columns: cols(&list),
        cells: rows,
        summary,
        warnings: Vec::new(),
        provenance: Provenance::for_spec(spec, tolerances(spec)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Axis, Solver, PROBE_DETUNING};

    #[test]
    fn parabola_vertex_is_exact_for_a_parabola() {
        let f = |x: f64| -2.0 * (x - 1.3).powi(2) + 4.0;
        let v = parabola_vertex([0.0, 1.0, 2.5], [f(0.0), f(1.0), f(2.5)]).unwrap();
        assert!((v - 1.3).abs() < 1e-12);
        assert!(parabola_vertex([0.0, 1.0, 2.0], [0.0, -1.0, 0.0]).is_none());
    }

    #[test]
    fn estimates_report_at_device_rates() {
        let mut spec = RunSpec::new(Experiment::EstimatesReport, ModelParams::default());
        spec.options.numerical_optimum = false;
        spec.resolve();
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.cells.len(), 2);
        let th = r.column("omega_threshold").unwrap();
        assert!((th[0] - 59.16).abs() < 0.01);
        let n = r.column("n_pn_eq3").unwrap();
        assert!((n[1] - 230.5).abs() < 0.1, "{n:?}");
        let n2 = r.column("n_pn_eq3_purcell").unwrap();
        assert!((n2[1] - 115.2).abs() < 0.1, "{n2:?}");
        let g = r.column("fwhm_guide_at_measured_n_khz").unwrap();
        assert!((g[1] - 14.01).abs() < 0.01, "{g:?}");
    }

    #[test]
    fn rabi_map_on_a_tiny_grid() {
        let mut spec = RunSpec::new(Experiment::RabiMap, ModelParams { fock_cutoff: 2, ..Default::default() });
        spec.axes = vec![Axis::linear("delta_ge", -2000.0, 2000.0, 2), Axis::linear(PROBE_DETUNING, -1.0, 1.0, 201)];
        spec.resolve();
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.cells.len(), 402);
        assert_eq!(r.summary["hygiene_ok"], json!(true));
        assert_eq!(r.summary["cutoff_converged"], json!(true));
        // Far-detuned atom: a dispersively shifted, nearly bare resonance.
        let abs_t = r.column("abs_t").unwrap();
        for row in abs_t.chunks(201) {
            let peak = row.iter().copied().fold(0.0, f64::max);
            assert!(peak > 0.9 && peak < 1.0, "{peak}");
        }
    }

    #[test]
    fn full_quantum_request_over_budget_is_refused() {
        let mut spec = RunSpec::new(Experiment::EmissionSpectrum, ModelParams { fock_cutoff: 300, ..Default::default() });
        spec.resolve();
        let err = run_experiment(&spec).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::exit::VALIDATION);
        assert!(err.to_string().contains("semiclassical"), "{err}");
        spec.params.fock_cutoff = 60;
        spec.options.memory_budget_mb = 1.0;
        let err = run_experiment(&spec).unwrap_err().to_string();
        assert!(err.contains("memory_budget_mb"), "{err}");
        let mut sweep = RunSpec::new(Experiment::PumpSweep, ModelParams { fock_cutoff: 300, ..Default::default() });
        sweep.resolve();
        assert!(sweep.problems(1).is_empty());
        sweep.solver = Some(Solver::Both);
        assert!(!sweep.problems(1).is_empty());
    }
}
