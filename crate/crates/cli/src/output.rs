//! Grid results and their CSV/JSON encodings.
//!
//! Both encodings are pure functions of the result. Floats are written in
//! their shortest round-trip form and maps are ordered, so identical results
//! give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunSpec};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisValues {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self { name: name.to_string(), unit: unit.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub code_version: String,
    pub experiment: String,
    pub preset: Option<String>,
    pub solver: String,
    /// Hash of the model parameters.
    pub params_hash: String,
    /// Hash of the whole resolved specification, output target excluded.
    pub spec_hash: String,
    pub tolerances: BTreeMap<String, f64>,
}

impl Provenance {
    pub fn for_spec(spec: &RunSpec, tolerances: BTreeMap<String, f64>) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: spec.experiment.id().to_string(),
            preset: spec.preset.clone(),
            solver: spec.solver().id().to_string(),
            params_hash: spec.params.fingerprint(),
            spec_hash: short_hash(spec.canonical_json().as_bytes()),
            tolerances,
        }
    }
}

pub fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Values on the Cartesian product of the axes; the last axis varies
/// fastest. Each cell holds one value per column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub axes: Vec<AxisValues>,
    pub columns: Vec<Column>,
    pub cells: Vec<Vec<f64>>,
    /// Run-level scalars and fit results.
    pub summary: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl GridResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn check_shape(&self) -> std::result::Result<(), String> {
        let expect: usize = self.shape().iter().product();
        if self.cells.len() != expect {
            return Err(format!("{} cells for axes of shape {:?}", self.cells.len(), self.shape()));
        }
        if let Some(bad) = self.cells.iter().position(|c| c.len() != self.columns.len()) {
            return Err(format!("cell {bad} has {} values for {} columns", self.cells[bad].len(), self.columns.len()));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c.name == name)?;
        Some(self.cells.iter().map(|c| c[j]).collect())
    }

    /// Axis coordinates of cell `i`.
    pub fn coordinates(&self, i: usize) -> Vec<f64> {
        let mut rem = i;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[k] = axis.values[rem % n];
            rem /= n;
        }
        out
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = self
            .axes
            .iter()
            .map(|a| a.name.clone())
            .chain(self.columns.iter().map(|c| c.name.clone()))
            .collect();
        w.write_record(&header).expect("in-memory write");
        for (i, cell) in self.cells.iter().enumerate() {
            let row: Vec<String> = self.coordinates(i).iter().chain(cell).map(|v| fmt_f64(*v)).collect();
            w.write_record(&row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_json(&self) -> Vec<u8> {
        let shape = self.shape();
        let mut payload = Map::new();
        for (j, col) in self.columns.iter().enumerate() {
            let flat: Vec<Value> = self.cells.iter().map(|c| number(c[j])).collect();
            payload.insert(col.name.clone(), nest(&flat, &shape));
        }
        let units: Map<String, Value> =
            self.columns.iter().map(|c| (c.name.clone(), Value::String(c.unit.clone()))).collect();
        let axes: Vec<Value> = self
            .axes
            .iter()
            .map(|a| json!({"name": a.name, "unit": a.unit, "values": a.values.iter().map(|v| number(*v)).collect::<Vec<_>>()}))
            .collect();
        let doc = json!({
            "axes": axes,
            "units": units,
            "payload": payload,
            "summary": self.summary,
            "warnings": self.warnings,
            "provenance": self.provenance,
        });
        let mut out = serde_json::to_vec_pretty(&doc).expect("document serializes");
        out.push(b'\n');
        out
    }

    pub fn encode(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// JSON has no NaN or infinities; they are written as strings.
pub fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(fmt_f64(v)))
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

fn nest(flat: &[Value], shape: &[usize]) -> Value {
    match shape {
        [] => flat.first().cloned().unwrap_or(Value::Null),
        [_] => Value::Array(flat.to_vec()),
        [n, rest @ ..] => {
            let stride: usize = rest.iter().product();
            Value::Array((0..*n).map(|i| nest(&flat[i * stride..(i + 1) * stride], rest)).collect())
        }
    }
}

/// Format from an explicit choice, else the file extension, else CSV.
pub fn infer_format(explicit: Option<Format>, path: Option<&Path>) -> Format {
    explicit
        .or_else(|| match path?.extension()?.to_str()? {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            _ => None,
        })
        .unwrap_or(Format::Csv)
}

/// Writes the encoded result to `path`, or to stdout when `path` is `None`.
pub fn write_output(result: &GridResult, path: Option<&Path>, format: Format) -> Result<()> {
    let bytes = result.encode(format);
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}
