//! Sampled curves and their CSV form.
//!
//! A CSV file has a one-line header and either three columns `(x, re, im)`
//! holding complex S21 or two columns `(x, y)`. The first header cell
//! declares the frequency unit, e.g. `f [MHz]`, `f_GHz` or `freq (kHz)`.
//! A two-column file holds |S21|² unless the second header cell mentions
//! `psd`.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YKind {
    ComplexS21,
    MagnitudeSquared,
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    Hz,
    #[serde(rename = "kHz")]
    KHz,
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "GHz")]
    GHz,
}

impl FreqUnit {
    pub fn in_mhz(self) -> f64 {
        match self {
            FreqUnit::Hz => 1e-6,
            FreqUnit::KHz => 1e-3,
            FreqUnit::MHz => 1.0,
            FreqUnit::GHz => 1e3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FreqUnit::Hz => "Hz",
            FreqUnit::KHz => "kHz",
            FreqUnit::MHz => "MHz",
            FreqUnit::GHz => "GHz",
        }
    }

    /// Finds a unit token in a header cell such as `f [GHz]` or `f_mhz`.
    pub fn from_header(cell: &str) -> Option<Self> {
        let lower = cell.to_ascii_lowercase();
        let tokens = lower.split(|c: char| !c.is_ascii_alphanumeric());
        let mut found = None;
        for t in tokens {
            let u = match t {
                "hz" => FreqUnit::Hz,
                "khz" => FreqUnit::KHz,
                "mhz" => FreqUnit::MHz,
                "ghz" => FreqUnit::GHz,
                _ => continue,
            };
            found = Some(u);
        }
        found
    }
}

/// Samples `y(x)`. Real-valued kinds keep a zero imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub x: Vec<f64>,
    pub y: Vec<C64>,
    pub kind: YKind,
    pub unit: FreqUnit,
}

impl CurveData {
    pub fn complex(x: Vec<f64>, y: Vec<C64>, unit: FreqUnit) -> Result<Self> {
        let d = Self { x, y, kind: YKind::ComplexS21, unit };
        d.check()?;
        Ok(d)
    }

    pub fn real(x: Vec<f64>, y: Vec<f64>, kind: YKind, unit: FreqUnit) -> Result<Self> {
        if kind == YKind::ComplexS21 {
            return Err(FitError::InvalidData("complex S21 needs complex samples".into()));
        }
        let d = Self { x, y: y.into_iter().map(|v| C64::new(v, 0.0)).collect(), kind, unit };
        d.check()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        self.kind == YKind::ComplexS21
    }

    /// Real parts; the sample values for real-valued kinds.
    pub fn real_values(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.re).collect()
    }

    /// Same samples with `x` expressed in `unit`.
    pub fn to_unit(&self, unit: FreqUnit) -> Self {
        let s = self.unit.in_mhz() / unit.in_mhz();
        Self { x: self.x.iter().map(|v| v * s).collect(), unit, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(FitError::InvalidData(format!("{} x values but {} y values", self.x.len(), self.y.len())));
        }
        if self.x.len() < 2 {
            return Err(FitError::InvalidData("need at least two samples".into()));
        }
        if let Some(i) = self.x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(FitError::InvalidData(format!("x is not strictly increasing at row {}", i + 1)));
        }
        if self.x.iter().any(|v| !v.is_finite()) || self.y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(FitError::InvalidData("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> std::result::Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| e.to_string())?.clone();
        let cols = header.len();
        if !(cols == 2 || cols == 3) {
            return Err(format!("expected 2 or 3 columns, found {cols}"));
        }
        let unit = FreqUnit::from_header(&header[0])
            .ok_or_else(|| format!("header cell '{}' declares no frequency unit (Hz, kHz, MHz, GHz)", &header[0]))?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != cols {
                return Err(format!("row {}: expected {cols} fields, found {}", i + 2, rec.len()));
            }
            let num = |j: usize| -> std::result::Result<f64, String> {
                rec[j].parse::<f64>().map_err(|_| format!("row {}: '{}' is not a number", i + 2, &rec[j]))
            };
            x.push(num(0)?);
            y.push(if cols == 3 { C64::new(num(1)?, num(2)?) } else { C64::new(num(1)?, 0.0) });
        }
        let kind = if cols == 3 {
            YKind::ComplexS21
        } else if header[1].to_ascii_lowercase().contains("psd") {
            YKind::Psd
        } else {
            YKind::MagnitudeSquared
        };
        let d = Self { x, y, kind, unit };
        d.check().map_err(|e| e.to_string())?;
        Ok(d)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| FitError::Io { path: path.into(), source })?;
        Self::from_csv_reader(file).map_err(|message| FitError::Csv { path: path.into(), message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_layouts() {
        let c = CurveData::from_csv_reader("f [GHz],re,im\n3.2,1,0\n3.3,0.5,-0.1\n".as_bytes()).unwrap();
        assert_eq!(c.kind, YKind::ComplexS21);
        assert_eq!(c.unit, FreqUnit::GHz);
        assert_eq!(c.y[1], C64::new(0.5, -0.1));
        assert_eq!(c.to_unit(FreqUnit::MHz).x[0], 3200.0);
        let r = CurveData::from_csv_reader("freq_kHz, psd\n-1,0.1\n0,1\n1,0.1\n".as_bytes()).unwrap();
        assert_eq!((r.kind, r.unit), (YKind::Psd, FreqUnit::KHz));
        let m = CurveData::from_csv_reader("f (MHz),s21_mag2\n1,2\n2,3\n".as_bytes()).unwrap();
        assert_eq!(m.kind, YKind::MagnitudeSquared);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(CurveData::from_csv_reader("f,re,im\n1,1,0\n2,1,0\n".as_bytes()).unwrap_err().contains("unit"));
        assert!(CurveData::from_csv_reader("f_MHz,y\n2,1\n1,1\n".as_bytes()).unwrap_err().contains("increasing"));
        assert!(CurveData::from_csv_reader("f_MHz,y\n1,x\n2,1\n".as_bytes()).unwrap_err().contains("row 2"));
        assert!(CurveData::from_csv_reader("f_MHz\n1\n".as_bytes()).is_err());
    }
}
