//! `saser fit`: line-shape fits of measured or simulated curves.

use std::collections::BTreeMap;
use std::path::Path;

use saser_fitkit::{fit_curve_with, Bounds, CurveData, FitOptions, FitResult, Model};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::output::{number, short_hash, AxisValues, Column, GridResult, Provenance};

#[derive(Debug, Clone, Default)]
pub struct FitRequest {
    pub model: String,
    pub data: std::path::PathBuf,
    /// `name=value` starting values; the rest come from the data.
    pub init: Vec<String>,
    /// Parameters to hold at their starting values.
    pub fix: Vec<String>,
    /// Parameters to free that the model holds fixed by default.
    pub free: Vec<String>,
}

fn parse_assignment(text: &str) -> Result<(String, f64)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("--init `{text}`: expected name=value")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::validation(format!("--init `{text}`: `{v}` is not a number")))?;
    Ok((k.trim().to_string(), v))
}

fn index(model: Model, name: &str, flag: &str) -> Result<usize> {
    model.index_of(name).ok_or_else(|| {
        CliError::validation(format!(
            "{flag} {name}: {} has parameters {}",
            model.id(),
            model.param_names().join(", ")
        ))
    })
}

pub fn fit_file(req: &FitRequest) -> Result<(FitResult, CurveData)> {
    let model: Model = req.model.parse()?;
    let data = CurveData::read_csv(Path::new(&req.data))?;
    if !model.accepts(data.kind) {
        return Err(CliError::validation(format!(
            "model {} cannot be fitted to {:?} data in {}",
            model.id(),
            data.kind,
            req.data.display()
        )));
    }
    let mut init = model.initial_guess(&data);
    for a in &req.init {
        let (k, v) = parse_assignment(a)?;
        init[index(model, &k, "--init")?] = v;
    }
    let mut fixed = model.default_fixed();
    for name in &req.fix {
        fixed[index(model, name, "--fix")?] = true;
    }
    for name in &req.free {
        fixed[index(model, name, "--free")?] = false;
    }
    let opts = FitOptions { fixed: Some(fixed), ..FitOptions::default() };
    let fit = fit_curve_with(model, &data, &init, &Bounds::for_model(model), &opts)?;
    Ok((fit, data))
}

/// The fit as a one-axis grid: data and model at each sample.
pub fn fit_result(req: &FitRequest) -> Result<GridResult> {
    let (fit, data) = fit_file(req)?;
    let model = fit.model;
    let mut columns = Vec::new();
    let unit = data.unit.label();
    let complex = data.is_complex();
    if complex {
        columns.extend([Column::new("data_re", "1"), Column::new("data_im", "1")]);
        columns.extend([Column::new("fit_re", "1"), Column::new("fit_im", "1")]);
    } else {
        columns.extend([Column::new("data", "1"), Column::new("fit", "1")]);
    }
    let mut cells = Vec::with_capacity(data.len());
    for (x, y) in data.x.iter().zip(&data.y) {
        let m = model.eval(*x, &fit.params)?;
        // Notch models fitted to |S21|² samples are compared as |S21|².
        let m = if model.is_complex() && !complex { m.norm_sqr().into() } else { m };
        cells.push(if complex { vec![y.re, y.im, m.re, m.im] } else { vec![y.re, m.re] });
    }
    let mut summary = BTreeMap::new();
    let params: serde_json::Map<String, Value> =
        fit.names.iter().zip(&fit.params).map(|(n, v)| (n.clone(), number(*v))).collect();
    let stderr: serde_json::Map<String, Value> =
        fit.names.iter().zip(&fit.stderr).map(|(n, v)| (n.clone(), number(*v))).collect();
    let fixed: Vec<&String> = fit.names.iter().zip(&fit.fixed).filter(|(_, f)| **f).map(|(n, _)| n).collect();
    summary.insert("model".into(), json!(model.id()));
    summary.insert("params".into(), Value::Object(params));
    summary.insert("stderr".into(), Value::Object(stderr));
    summary.insert("fixed".into(), json!(fixed));
    summary.insert("residual_norm".into(), number(fit.residual_norm));
    summary.insert("gradient_norm".into(), number(fit.gradient_norm));
    summary.insert("converged".into(), json!(fit.converged));
    summary.insert("iterations".into(), json!(fit.iterations));
    summary.insert("message".into(), json!(fit.message));
    summary.insert("frequency_unit_of_params".into(), json!(unit));
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("fit did not converge: {}", fit.message));
    }
    let lm = saser_fitkit::LmOptions::default();
    let request = format!("{}|{:?}|{:?}|{:?}", model.id(), req.init, req.fix, req.free);
    let provenance = Provenance {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: "fit".into(),
        preset: None,
        solver: "levenberg_marquardt".into(),
        params_hash: short_hash(
            &data.x.iter().chain(data.y.iter().flat_map(|c| [&c.re, &c.im])).flat_map(|v| v.to_le_bytes()).collect::<Vec<_>>(),
        ),
        spec_hash: short_hash(request.as_bytes()),
        tolerances: BTreeMap::from([("fit_xtol".to_string(), lm.xtol), ("fit_gtol".to_string(), lm.gtol)]),
    };
    Ok(GridResult {
        axes: vec![AxisValues { name: "x".into(), unit: unit.into(), values: data.x.clone() }],
        columns,
        cells,
        summary,
        warnings,
        provenance,
    })
}
