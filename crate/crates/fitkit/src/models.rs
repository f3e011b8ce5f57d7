//! The four spectroscopy line shapes. All frequencies and rates share the
//! unit of the frequency axis; no factors of 2π appear.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::data::{CurveData, YKind};
use crate::error::{invalid, FitError, Result};
use crate::faddeeva::faddeeva;

/// Notch transmission of the g↔e transition,
/// `S21 = 1 − (Γ1/2Γ2)(1 + i(f−f0)/Γ2) / (1 + (f−f0)²/Γ2² + Ω²/(Γ1Γ2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchGe {
    pub gamma1: f64,
    pub gamma2: f64,
    pub f0: f64,
    pub omega: f64,
}

/// Notch transmission of the g↔f transition,
/// `S21 = 1 − (Γ1/2Γ2) / (1 − 2i(f−f0)/Γ2 + Ω²(2 + r)/(Γ2(Γ2 + 2i(f−f0))))`
/// with `r = Γ_fe/Γ_eg`. The fit yields `Γ1 = Γ_fg` and `Γ2 = Γ_fe + Γ_fg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchGf {
    pub gamma1: f64,
    pub gamma2: f64,
    pub f0: f64,
    pub omega: f64,
    pub rate_ratio: f64,
}

/// Resonator transmission `|S21|² = a² Q² / (1 + 4Q²(f/f0 − 1)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonator {
    pub q_i: f64,
    pub f0: f64,
    pub a: f64,
}

/// Voigt peak on a flat background. `amplitude` is the peak height above
/// `background`; the widths are full widths at half maximum of the
/// Lorentzian and Gaussian components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voigt {
    pub center: f64,
    pub lorentz_fwhm: f64,
    pub gauss_fwhm: f64,
    pub amplitude: f64,
    pub background: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be > 0, got {v}")))
    }
}

pub fn eval_notch_ge(f: f64, p: &NotchGe) -> Result<C64> {
    positive("gamma1", p.gamma1)?;
    positive("gamma2", p.gamma2)?;
    let u = (f - p.f0) / p.gamma2;
    let num = C64::new(1.0, u);
    let den = 1.0 + u * u + p.omega * p.omega / (p.gamma1 * p.gamma2);
    Ok(1.0 - p.gamma1 / (2.0 * p.gamma2) * num / den)
}

pub fn eval_notch_gf(f: f64, p: &NotchGf) -> Result<C64> {
    positive("gamma1", p.gamma1)?;
    positive("gamma2", p.gamma2)?;
    if !(p.rate_ratio >= 0.0) {
        return Err(invalid("rate_ratio", format!("must be ≥ 0, got {}", p.rate_ratio)));
    }
    let df = f - p.f0;
    let pump = p.omega * p.omega * (2.0 + p.rate_ratio) / (p.gamma2 * C64::new(p.gamma2, 2.0 * df));
    let den = C64::new(1.0, -2.0 * df / p.gamma2) + pump;
    Ok(1.0 - p.gamma1 / (2.0 * p.gamma2) / den)
}

pub fn eval_lorentzian_resonator(f: f64, p: &Resonator) -> Result<f64> {
    positive("q_i", p.q_i)?;
    positive("f0", p.f0)?;
    let d = f / p.f0 - 1.0;
    Ok(p.a * p.a * p.q_i * p.q_i / (1.0 + 4.0 * p.q_i * p.q_i * d * d))
}

/// Gaussian standard deviation for a given FWHM.
pub fn gauss_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

/// Peak-normalized Voigt profile: the convolution of a Lorentzian and a
/// Gaussian evaluated as `Re w(z)/Re w(iy)`, `z = (x + iγ)/(σ√2)`.
fn voigt_shape(x: f64, lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    if gauss_fwhm == 0.0 {
        let u = 2.0 * x / lorentz_fwhm;
        return 1.0 / (1.0 + u * u);
    }
    let s = gauss_sigma(gauss_fwhm) * 2f64.sqrt();
    if lorentz_fwhm == 0.0 {
        return (-(x / s).powi(2)).exp();
    }
    let y = 0.5 * lorentz_fwhm / s;
    faddeeva(C64::new(x / s, y)).re / faddeeva(C64::new(0.0, y)).re
}

pub fn eval_voigt(f: f64, p: &Voigt) -> Result<f64> {
    for (name, w) in [("lorentz_fwhm", p.lorentz_fwhm), ("gauss_fwhm", p.gauss_fwhm)] {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(invalid(name, format!("must be ≥ 0, got {w}")));
        }
    }
    if p.lorentz_fwhm == 0.0 && p.gauss_fwhm == 0.0 {
        return Err(invalid("lorentz_fwhm", "both widths are zero"));
    }
    Ok(p.amplitude * voigt_shape(f - p.center, p.lorentz_fwhm, p.gauss_fwhm) + p.background)
}

/// Olivero–Longbothum approximation of the Voigt FWHM.
pub fn voigt_fwhm_approx(lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    0.5346 * lorentz_fwhm + (0.2166 * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    NotchGe,
    NotchGf,
    Lorentzian,
    Voigt,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::NotchGe, Model::NotchGf, Model::Lorentzian, Model::Voigt];

    pub fn id(self) -> &'static str {
        match self {
            Model::NotchGe => "notch_ge",
            Model::NotchGf => "notch_gf",
            Model::Lorentzian => "lorentzian",
            Model::Voigt => "voigt",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Model::NotchGe => &["gamma1", "gamma2", "f0", "omega"],
            Model::NotchGf => &["gamma1", "gamma2", "f0", "omega", "rate_ratio"],
            Model::Lorentzian => &["q_i", "f0", "a"],
            Model::Voigt => &["center", "lorentz_fwhm", "gauss_fwhm", "amplitude", "background"],
        }
    }

    pub fn index_of(self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|n| *n == name)
    }

    /// Whether the model predicts complex S21.
    pub fn is_complex(self) -> bool {
        matches!(self, Model::NotchGe | Model::NotchGf)
    }

    /// Parameters held fixed unless the caller frees them. In the g↔f notch
    /// the pump and the rate ratio only enter as `Ω²(2 + r)`, so `r` is
    /// fixed.
    pub fn default_fixed(self) -> Vec<bool> {
        let mut v = vec![false; self.param_names().len()];
        if self == Model::NotchGf {
            v[4] = true;
        }
        v
    }

    /// Physical bounds: rates, widths and quality factors non-negative.
    pub fn default_bounds(self) -> (Vec<f64>, Vec<f64>) {
        let inf = f64::INFINITY;
        let lo = match self {
            Model::NotchGe => vec![0.0, 0.0, -inf, 0.0],
            Model::NotchGf => vec![0.0, 0.0, -inf, 0.0, 0.0],
            Model::Lorentzian => vec![0.0, 0.0, 0.0],
            Model::Voigt => vec![-inf, 0.0, 0.0, -inf, -inf],
        };
        let hi = vec![inf; lo.len()];
        (lo, hi)
    }

    /// Model value at `f`; real-valued models return a zero imaginary part.
    pub fn eval(self, f: f64, p: &[f64]) -> Result<C64> {
        if p.len() != self.param_names().len() {
            return Err(FitError::InvalidData(format!(
                "{} takes {} parameters, got {}",
                self.id(),
                self.param_names().len(),
                p.len()
            )));
        }
        Ok(match self {
            Model::NotchGe => eval_notch_ge(f, &NotchGe { gamma1: p[0], gamma2: p[1], f0: p[2], omega: p[3] })?,
            Model::NotchGf => eval_notch_gf(
                f,
                &NotchGf { gamma1: p[0], gamma2: p[1], f0: p[2], omega: p[3], rate_ratio: p[4] },
            )?,
            Model::Lorentzian => eval_lorentzian_resonator(f, &Resonator { q_i: p[0], f0: p[1], a: p[2] })?.into(),
            Model::Voigt => eval_voigt(
                f,
                &Voigt { center: p[0], lorentz_fwhm: p[1], gauss_fwhm: p[2], amplitude: p[3], background: p[4] },
            )?
            .into(),
        })
    }

    /// Whether the model can be compared with samples of `kind`.
    pub fn accepts(self, kind: YKind) -> bool {
        match self {
            Model::NotchGe | Model::NotchGf => kind != YKind::Psd,
            Model::Lorentzian => kind == YKind::MagnitudeSquared,
            Model::Voigt => kind != YKind::ComplexS21,
        }
    }

    /// Rough starting point read off the data: peak or dip position,
    /// half-width and depth.
    pub fn initial_guess(self, data: &CurveData) -> Vec<f64> {
        let n = data.len();
        let edge = (n / 20).max(1);
        let mut outer: Vec<f64> = data.y[..edge].iter().chain(&data.y[n - edge..]).map(|v| v.re).collect();
        outer.sort_by(f64::total_cmp);
        let span = data.x[n - 1] - data.x[0];
        // Feature strength: peak height for real data, dip depth |1 − S21|
        // for notch data.
        let strength: Vec<f64> = if self.is_complex() {
            data.y.iter().map(|v| if data.is_complex() { (1.0 - v).norm() } else { 1.0 - v.re }).collect()
        } else {
            let bg = outer[outer.len() / 2];
            data.y.iter().map(|v| v.re - bg).collect()
        };
        let (imax, smax) = strength.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let xc = data.x[imax];
        let above: Vec<f64> = data.x.iter().zip(&strength).filter(|(_, s)| **s >= 0.5 * smax).map(|(x, _)| *x).collect();
        let width = (above.last().unwrap() - above.first().unwrap()).max(span / n as f64);
        match self {
            Model::NotchGe => {
                // Guess Ω²/(Γ1Γ2) = 0.3; the dip FWHM is 2Γ2√(1 + s).
                let s = 0.3;
                let g2 = width / (2.0 * (1.0_f64 + s).sqrt());
                let g1 = 2.0 * g2 * smax * (1.0 + s);
                vec![g1, g2, xc, (s * g1 * g2).sqrt()]
            }
            Model::NotchGf => {
                let r = 100.0 / 35.0;
                let g2 = width;
                let g1 = 2.0 * g2 * smax * 1.3;
                vec![g1, g2, xc, (0.3 * g2 * g2 / (2.0 + r)).sqrt(), r]
            }
            Model::Lorentzian => {
                let q = xc / width;
                vec![q, xc, smax.max(0.0).sqrt() / q]
            }
            Model::Voigt => vec![xc, 0.6 * width, 0.6 * width, smax, outer[outer.len() / 2]],
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Model {
    type Err = FitError;
    fn from_str(s: &str) -> Result<Self> {
        Model::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| FitError::UnknownModel(s.into()))
    }
}
