//! Run specifications: JSON documents, preset expansion, overrides and
//! validation.
//!
//! A document is an object with the keys `preset`, `experiment`, `solver`,
//! `params`, `axes`, `options` and `output`. When `preset` is given the
//! preset's specification is the base and the document is merged over it
//! key by key. Unknown keys at any level are errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use saser_core::params::PARAM_NAMES;
use saser_core::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::guard;
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    RabiMap,
    HotspotMap,
    GainProfile,
    EmissionMap,
    EmissionSpectrum,
    PumpSweep,
    EstimatesReport,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::RabiMap,
        Experiment::HotspotMap,
        Experiment::GainProfile,
        Experiment::EmissionMap,
        Experiment::EmissionSpectrum,
        Experiment::PumpSweep,
        Experiment::EstimatesReport,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::RabiMap => "rabi_map",
            Experiment::HotspotMap => "hotspot_map",
            Experiment::GainProfile => "gain_profile",
            Experiment::EmissionMap => "emission_map",
            Experiment::EmissionSpectrum => "emission_spectrum",
            Experiment::PumpSweep => "pump_sweep",
            Experiment::EstimatesReport => "estimates_report",
        }
    }

    pub fn default_solver(self) -> Solver {
        match self {
            Experiment::PumpSweep | Experiment::EstimatesReport => Solver::Semiclassical,
            _ => Solver::FullQuantum,
        }
    }

    pub fn allowed_solvers(self) -> &'static [Solver] {
        match self {
            Experiment::PumpSweep => &[Solver::FullQuantum, Solver::Semiclassical, Solver::Both],
            Experiment::EstimatesReport => &[Solver::Semiclassical],
            _ => &[Solver::FullQuantum],
        }
    }

    /// Axis layout: `Param` is any model parameter, the others are literal
    /// axis names.
    fn axis_roles(self) -> &'static [AxisRole] {
        match self {
            Experiment::RabiMap | Experiment::HotspotMap => &[AxisRole::Param, AxisRole::ProbeDetuning],
            Experiment::GainProfile => &[AxisRole::ProbeDetuning],
            Experiment::EmissionMap => &[AxisRole::Param, AxisRole::Frequency],
            Experiment::EmissionSpectrum => &[AxisRole::Frequency],
            Experiment::PumpSweep | Experiment::EstimatesReport => &[AxisRole::Param],
        }
    }

    /// Axes used when the document gives none.
    pub fn default_axes(self, p: &ModelParams) -> Vec<Axis> {
        let th = (p.gamma_fe * p.gamma_eg).sqrt();
        match self {
            Experiment::RabiMap | Experiment::HotspotMap => {
                vec![Axis::linear("delta_ge", -100.0, 100.0, 41), Axis::linear(PROBE_DETUNING, -50.0, 50.0, 201)]
            }
            Experiment::GainProfile => vec![Axis::linear(PROBE_DETUNING, -50.0, 50.0, 401)],
            Experiment::EmissionMap => vec![
                Axis::linear("delta_ge", -50.0, 50.0, 21),
                Axis::linear(FREQUENCY, -5.0 * p.kappa, 5.0 * p.kappa, 401),
            ],
            Experiment::EmissionSpectrum => vec![Axis::linear(FREQUENCY, -5.0 * p.kappa, 5.0 * p.kappa, 1001)],
            Experiment::PumpSweep => vec![Axis { spacing: Spacing::Log, ..Axis::linear("omega_pump", 0.3 * th, 30.0 * th, 60) }],
            Experiment::EstimatesReport => vec![Axis::linear(
                "kappa",
                saser_core::params::device::KAPPA_SINGLE_PHONON,
                saser_core::params::device::KAPPA_MULTI_PHONON,
                2,
            )],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisRole {
    Param,
    ProbeDetuning,
    Frequency,
}

/// Probe detuning from the resonator (MHz).
pub const PROBE_DETUNING: &str = "probe_detuning";
/// Emission frequency relative to the resonator (MHz).
pub const FREQUENCY: &str = "frequency";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    FullQuantum,
    Semiclassical,
    Both,
}

impl Solver {
    pub fn id(self) -> &'static str {
        match self {
            Solver::FullQuantum => "full_quantum",
            Solver::Semiclassical => "semiclassical",
            Solver::Both => "both",
        }
    }

    pub fn full_quantum(self) -> bool {
        matches!(self, Solver::FullQuantum | Solver::Both)
    }

    pub fn semiclassical(self) -> bool {
        matches!(self, Solver::Semiclassical | Solver::Both)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(name: &str, start: f64, stop: f64, points: usize) -> Self {
        Self { name: name.to_string(), start, stop, points, spacing: Spacing::Linear }
    }

    /// Grid values; the endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i == n - 1 {
                    return self.stop;
                }
                let s = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * s,
                    Spacing::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * s).exp(),
                }
            })
            .collect()
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let name = &self.name;
        if self.points < 2 {
            out.push(format!("axis `{name}`: points must be >= 2, got {}", self.points));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            out.push(format!("axis `{name}`: start and stop must be finite"));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            out.push(format!("axis `{name}`: log spacing needs start > 0 and stop > 0"));
        }
        if name == "fock_cutoff" && self.values().iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            out.push(format!("axis `{name}`: every value must be a positive integer"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Numerical and experiment-specific controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Memory available to full-quantum solves (MiB).
    pub memory_budget_mb: f64,
    /// Fold the Purcell loss into κ (`κ + κ_Purc`) before solving.
    pub fold_purcell: bool,
    /// Pump detuning follows `delta_gf + slope · delta_ge` across cells; 0
    /// keeps the pump locked to the g↔f transition.
    pub pump_detuning_slope: f64,
    /// Re-solve each full-quantum cell with the cutoff raised by 25%.
    pub cutoff_check: bool,
    /// Finite-amplitude checks of probe linearity per cell.
    pub linearity_checks: usize,
    /// Fit a Voigt profile to emission spectra.
    pub fit_voigt: bool,
    /// Compute regression linewidths in full-quantum pump sweeps.
    pub sweep_linewidth: bool,
    /// Search the mean-field optimum and onset in estimates reports.
    pub numerical_optimum: bool,
    /// Correlation propagation stops below this fraction of `G(0)`.
    pub spectrum_tail_tolerance: f64,
    /// Scaled residual at which mean-field Newton iterations stop.
    pub mean_field_tolerance: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            memory_budget_mb: 4096.0,
            fold_purcell: false,
            pump_detuning_slope: 0.0,
            cutoff_check: true,
            linearity_checks: 3,
            fit_voigt: true,
            sweep_linewidth: true,
            numerical_optimum: true,
            spectrum_tail_tolerance: 1e-5,
            mean_field_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Preset the document was expanded from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub experiment: Experiment,
    #[serde(default)]
    pub solver: Option<Solver>,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunSpec {
    pub fn new(experiment: Experiment, params: ModelParams) -> Self {
        Self {
            preset: None,
            experiment,
            solver: None,
            params,
            axes: Vec::new(),
            options: Options::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn solver(&self) -> Solver {
        self.solver.unwrap_or(self.experiment.default_solver())
    }

    /// Fills the solver and axes with the experiment defaults.
    pub fn resolve(&mut self) {
        if self.solver.is_none() {
            self.solver = Some(self.experiment.default_solver());
        }
        if self.axes.is_empty() {
            self.axes = self.experiment.default_axes(&self.params);
        }
    }

    pub fn axis(&self, name: &str) -> Option<&Axis> {
        self.axes.iter().find(|a| a.name == name)
    }

    /// Every violation of the specification, including the memory guard.
    pub fn problems(&self, threads: usize) -> Vec<String> {
        let mut out: Vec<String> = self.params.violations().iter().map(|e| e.to_string()).collect();
        let solver = self.solver();
        if !self.experiment.allowed_solvers().contains(&solver) {
            let allowed: Vec<&str> = self.experiment.allowed_solvers().iter().map(|s| s.id()).collect();
            out.push(format!(
                "solver `{solver}` cannot run {}: allowed {}",
                self.experiment,
                allowed.join(", ")
            ));
        }
        let roles = self.experiment.axis_roles();
        if self.axes.len() != roles.len() {
            out.push(format!(
                "{} takes {} axes ({}), got {}",
                self.experiment,
                roles.len(),
                roles.iter().map(|r| role_label(*r)).collect::<Vec<_>>().join(", "),
                self.axes.len()
            ));
        } else {
            for (axis, role) in self.axes.iter().zip(roles) {
                let ok = match role {
                    AxisRole::Param => PARAM_NAMES.contains(&axis.name.as_str()),
                    AxisRole::ProbeDetuning => axis.name == PROBE_DETUNING,
                    AxisRole::Frequency => axis.name == FREQUENCY,
                };
                if !ok {
                    out.push(format!("axis `{}`: expected {}", axis.name, role_label(*role)));
                }
            }
        }
        for axis in &self.axes {
            out.extend(axis.problems());
        }
        for cell in self.cell_params_extremes() {
            for e in cell.violations() {
                let msg = format!("at an axis endpoint: {e}");
                if !out.contains(&msg) {
                    out.push(msg);
                }
            }
        }
        if !(self.params.kappa > 0.0) && self.axis("kappa").is_none() {
            out.push("kappa must be > 0 for steady-state solves".into());
        }
        if matches!(self.experiment, Experiment::RabiMap | Experiment::HotspotMap | Experiment::GainProfile) {
            for (name, v) in [("kappa_in", self.params.kappa_in), ("kappa_out", self.params.kappa_out)] {
                if !(v > 0.0) {
                    out.push(format!("{name} must be > 0 for probe transmission, got {v}"));
                }
            }
        }
        if self.experiment == Experiment::EstimatesReport && !(self.params.gamma_fe > self.params.gamma_eg) {
            out.push(format!(
                "estimates need population inversion: gamma_fe = {} <= gamma_eg = {}",
                self.params.gamma_fe, self.params.gamma_eg
            ));
        }
        let o = &self.options;
        if !(o.memory_budget_mb > 0.0) {
            out.push("options.memory_budget_mb must be > 0".into());
        }
        if !(o.spectrum_tail_tolerance > 0.0 && o.spectrum_tail_tolerance < 1.0) {
            out.push("options.spectrum_tail_tolerance must lie in (0, 1)".into());
        }
        if !(o.mean_field_tolerance > 0.0) {
            out.push("options.mean_field_tolerance must be > 0".into());
        }
        if !o.pump_detuning_slope.is_finite() {
            out.push("options.pump_detuning_slope must be finite".into());
        }
        if solver.full_quantum() && self.experiment.allowed_solvers().contains(&solver) {
            if let Err(e) = guard::check_spec(self, threads) {
                out.push(e);
            }
        }
        out
    }

    pub fn validate(&self, threads: usize) -> Result<()> {
        let problems = self.problems(threads);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems))
        }
    }

    /// Parameters of a cell: `params` with the given parameter-axis values
    /// applied, then the pump-tracking rule.
    pub fn cell_params(&self, assignments: &[(&str, f64)]) -> Result<ModelParams> {
        let mut p = self.params.clone();
        for &(name, v) in assignments {
            p.set(name, v)?;
        }
        if self.options.pump_detuning_slope != 0.0 {
            p.delta_gf = self.params.delta_gf + self.options.pump_detuning_slope * p.delta_ge;
        }
        Ok(p)
    }

    /// Cell parameters at the first and last value of every parameter axis.
    fn cell_params_extremes(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for axis in self.axes.iter().filter(|a| PARAM_NAMES.contains(&a.name.as_str())) {
            for v in [axis.start, axis.stop] {
                if let Ok(p) = self.cell_params(&[(axis.name.as_str(), v)]) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Largest Fock cutoff over all cells.
    pub fn max_cutoff(&self) -> usize {
        match self.axis("fock_cutoff") {
            Some(a) => a.values().iter().fold(self.params.fock_cutoff as f64, |m, &v| m.max(v)) as usize,
            None => self.params.fock_cutoff,
        }
    }

    /// Canonical JSON of the resolved specification without the output
    /// target.
    pub fn canonical_json(&self) -> String {
        let mut s = self.clone();
        s.output = OutputSpec::default();
        serde_json::to_string(&s).expect("spec serializes")
    }
}

fn role_label(role: AxisRole) -> &'static str {
    match role {
        AxisRole::Param => "a model parameter",
        AxisRole::ProbeDetuning => PROBE_DETUNING,
        AxisRole::Frequency => FREQUENCY,
    }
}

/// How a run was requested on the command line.
#[derive(Debug, Clone, Default)]
pub struct Request {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
}

/// Reads the configuration and preset, applies overrides and resolves
/// defaults. Validation is separate, see [`RunSpec::validate`].
pub fn load(req: &Request) -> Result<RunSpec> {
    let mut doc = match &req.config {
        Some(path) => read_document(path)?,
        None => Value::Object(Map::new()),
    };
    if let Some(name) = &req.preset {
        let obj = doc.as_object_mut().expect("document is an object");
        if let Some(Value::String(other)) = obj.get("preset") {
            if other != name {
                return Err(CliError::validation(format!(
                    "--preset {name} conflicts with \"preset\": \"{other}\" in the configuration"
                )));
            }
        }
        obj.insert("preset".into(), Value::String(name.clone()));
    }
    let doc = expand_preset(doc)?;
    let mut spec = from_value(doc)?;
    spec.resolve();
    if !req.overrides.is_empty() {
        let mut v = serde_json::to_value(&spec).expect("spec serializes");
        for o in &req.overrides {
            apply_override(&mut v, o)?;
        }
        spec = from_value(v)?;
        spec.resolve();
    }
    Ok(spec)
}

/// Parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunSpec> {
    let spec = load(&Request { config: Some(path.to_path_buf()), ..Default::default() })?;
    spec.validate(rayon::current_num_threads())?;
    Ok(spec)
}

fn read_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_document(&text).map_err(|e| match e {
        CliError::Validation(v) => {
            CliError::Validation(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect())
        }
        other => other,
    })
}

pub fn parse_document(text: &str) -> Result<Value> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))?;
    if !v.is_object() {
        return Err(CliError::validation("the configuration must be a JSON object"));
    }
    Ok(v)
}

fn expand_preset(doc: Value) -> Result<Value> {
    let Some(name) = doc.get("preset").and_then(Value::as_str).map(str::to_string) else {
        if let Some(p) = doc.get("preset") {
            return Err(CliError::validation(format!("`preset` must be a string, got {p}")));
        }
        return Ok(doc);
    };
    let preset = presets::find(&name)?;
    let mut base = serde_json::to_value(&preset.spec).expect("preset serializes");
    merge(&mut base, doc);
    Ok(base)
}

/// Deep merge of objects; any other value replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn from_value(v: Value) -> Result<RunSpec> {
    let text = serde_json::to_string_pretty(&v).expect("value serializes");
    serde_json::from_str(&text).map_err(|e| CliError::validation(describe_serde_error(&e, &text)))
}

/// serde reports the position in the merged document; name the offending
/// line too, since that document is not a file the user can open.
fn describe_serde_error(e: &serde_json::Error, text: &str) -> String {
    let line = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("").trim();
    if line.is_empty() {
        e.to_string()
    } else {
        format!("{e} (near `{line}`)")
    }
}

/// Applies `key=value`. Keys are dotted paths into the document
/// (`params.kappa`, `options.fit_voigt`, `axes.omega_pump.points`); a bare
/// model parameter or option name is accepted as a shorthand. The value is
/// parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, text: &str) -> Result<()> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let path: Vec<String> = if key.contains('.') {
        key.split('.').map(str::to_string).collect()
    } else if PARAM_NAMES.contains(&key) {
        vec!["params".into(), key.into()]
    } else if serde_json::to_value(Options::default()).unwrap().get(key).is_some() {
        vec!["options".into(), key.into()]
    } else if ["experiment", "solver"].contains(&key) {
        vec![key.into()]
    } else {
        return Err(CliError::validation(format!(
            "unknown override key `{key}`: use a model parameter, an option, experiment, solver, or a dotted path"
        )));
    };
    let mut slot = &mut *doc;
    for (depth, part) in path.iter().enumerate() {
        let last = depth + 1 == path.len();
        slot = match slot {
            Value::Object(map) => {
                if last {
                    map.insert(part.clone(), value);
                    return Ok(());
                }
                map.entry(part.clone()).or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx = match part.parse::<usize>() {
                    Ok(i) => Some(i),
                    Err(_) => items.iter().position(|it| it.get("name").and_then(Value::as_str) == Some(part)),
                };
                let Some(item) = idx.and_then(|i| items.get_mut(i)) else {
                    return Err(CliError::validation(format!("override `{key}`: no element `{part}`")));
                };
                if last {
                    *item = value;
                    return Ok(());
                }
                item
            }
            _ => return Err(CliError::validation(format!("override `{key}`: `{part}` is not inside an object or list"))),
        };
    }
    Ok(())
}
