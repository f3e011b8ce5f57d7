//! Synthetic spectroscopy records at the device's parameter values, used
//! for round-trip checks of the fits.
//!
//! Noise is Gaussian with standard deviation 1 % of the feature size: the
//! largest `|1 − S21|` for the notch models (applied to each quadrature),
//! the peak value for the resonator and the Voigt amplitude.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;

use crate::data::{CurveData, FreqUnit, YKind};
use crate::fit::{fit_curve, Bounds};
use crate::models::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub model: Model,
    pub truth: Vec<f64>,
    pub x: Vec<f64>,
    pub unit: FreqUnit,
    /// Relative noise level.
    pub noise: f64,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl SyntheticCase {
    /// g↔e notch: Γ1 = 35, Γ2 = 17.5, Ω = 13 MHz.
    /// g↔f notch: Γ_fg = 6, Γ_fe = 100 (Γ2 = 106), Ω = 30 MHz, Γ_fe/Γ_eg = 100/35.
    /// Resonator: Q = 34·10³ at 3210 MHz, a = 1e-5.
    /// Voigt: 7 kHz Lorentzian and 6 kHz Gaussian widths on a 5 % background,
    /// 1001 samples over ±80 kHz so the wings separate the two widths.
    pub fn device(model: Model) -> Self {
        let (truth, x, unit) = match model {
            Model::NotchGe => (vec![35.0, 17.5, 0.0, 13.0], grid(-150.0, 150.0, 401), FreqUnit::MHz),
            Model::NotchGf => (vec![6.0, 106.0, 0.0, 30.0, 100.0 / 35.0], grid(-600.0, 600.0, 401), FreqUnit::MHz),
            Model::Lorentzian => {
                let f0 = 3210.0;
                let w = f0 / 34e3;
                (vec![34e3, f0, 1e-5], grid(f0 - 6.0 * w, f0 + 6.0 * w, 401), FreqUnit::MHz)
            }
            Model::Voigt => (vec![0.0, 7.0, 6.0, 1.0, 0.05], grid(-80.0, 80.0, 1001), FreqUnit::KHz),
        };
        Self { model, truth, x, unit, noise: 0.01 }
    }

    fn clean(&self) -> Vec<C64> {
        self.x.iter().map(|&f| self.model.eval(f, &self.truth).expect("valid truth")).collect()
    }

    fn feature_size(&self, clean: &[C64]) -> f64 {
        match self.model {
            Model::NotchGe | Model::NotchGf => clean.iter().map(|v| (1.0 - v).norm()).fold(0.0, f64::max),
            Model::Lorentzian => clean.iter().map(|v| v.re).fold(0.0, f64::max),
            Model::Voigt => self.truth[3],
        }
    }

    /// Noisy record drawn from the seeded stream.
    pub fn sample(&self, seed: u64) -> CurveData {
        let clean = self.clean();
        let sigma = self.noise * self.feature_size(&clean);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        if self.model.is_complex() {
            let y = clean.iter().map(|v| v + C64::new(normal.sample(&mut rng), normal.sample(&mut rng))).collect();
            CurveData::complex(self.x.clone(), y, self.unit).expect("valid grid")
        } else {
            let kind = if self.model == Model::Voigt { YKind::Psd } else { YKind::MagnitudeSquared };
            let y = clean.iter().map(|v| v.re + normal.sample(&mut rng)).collect();
            CurveData::real(self.x.clone(), y, kind, self.unit).expect("valid grid")
        }
    }

    /// Noiseless record.
    pub fn exact(&self) -> CurveData {
        Self { noise: 0.0, ..self.clone() }.sample(0)
    }

    /// Starting point with every free shape parameter scaled by a factor
    /// in `[1 − spread, 1 + spread]` and positions shifted by up to
    /// `spread` times the line width.
    pub fn perturbed_init(&self, seed: u64, spread: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let u = Uniform::new_inclusive(-spread, spread).expect("valid range");
        let width = self.width();
        let fixed = self.model.default_fixed();
        self.model
            .param_names()
            .iter()
            .zip(&self.truth)
            .zip(&fixed)
            .map(|((name, &v), &fix)| match (*name, fix) {
                (_, true) => v,
                ("f0" | "center", _) => v + u.sample(&mut rng) * width,
                ("background", _) => v + u.sample(&mut rng) * self.truth[3] * 0.1,
                _ => v * (1.0 + u.sample(&mut rng)),
            })
            .collect()
    }

    /// Characteristic line width of the truth curve.
    pub fn width(&self) -> f64 {
        let t = &self.truth;
        match self.model {
            Model::NotchGe | Model::NotchGf => t[1],
            Model::Lorentzian => t[1] / t[0],
            Model::Voigt => crate::models::voigt_fwhm_approx(t[1], t[2]),
        }
    }

    /// Shape quantities judged by the round trip, as `(name, value)`. For
    /// the g↔f notch these are the physical rates `Γ_fg = Γ1` and
    /// `Γ_fe = Γ2 − Γ1`.
    pub fn shape(&self, p: &[f64]) -> Vec<(&'static str, f64)> {
        match self.model {
            Model::NotchGe => vec![("gamma1", p[0]), ("gamma2", p[1]), ("omega", p[3])],
            Model::NotchGf => vec![("gamma_fg", p[0]), ("gamma_fe", p[1] - p[0]), ("omega", p[3])],
            Model::Lorentzian => vec![("q_i", p[0]), ("a", p[2])],
            Model::Voigt => vec![("lorentz_fwhm", p[1]), ("gauss_fwhm", p[2]), ("amplitude", p[3])],
        }
    }

    fn position(&self, p: &[f64]) -> f64 {
        match self.model {
            Model::Voigt => p[0],
            Model::Lorentzian => p[1],
            _ => p[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrip {
    pub model: Model,
    pub trials: usize,
    pub converged: usize,
    /// Converged fits with every shape quantity within the tolerance and the
    /// line position within the tolerance times the width.
    pub within_tolerance: usize,
    /// Largest relative shape error over the successful trials, by name.
    pub worst: Vec<(String, f64)>,
}

impl RoundTrip {
    pub fn success_rate(&self) -> f64 {
        self.within_tolerance as f64 / self.trials as f64
    }
}

/// Fits `trials` noisy records starting from perturbed initial values.
pub fn round_trip(case: &SyntheticCase, trials: usize, spread: f64, tolerance: f64) -> RoundTrip {
    let truth_shape = case.shape(&case.truth);
    let mut worst: Vec<(String, f64)> = truth_shape.iter().map(|(n, _)| (n.to_string(), 0.0)).collect();
    let (mut converged, mut within) = (0, 0);
    let bounds = Bounds::for_model(case.model);
    for t in 0..trials {
        let data = case.sample(1000 + t as u64);
        let init = case.perturbed_init(t as u64, spread);
        let Ok(fit) = fit_curve(case.model, &data, &init, &bounds) else { continue };
        if !fit.converged {
            continue;
        }
        converged += 1;
        let errs: Vec<f64> =
            case.shape(&fit.params).iter().zip(&truth_shape).map(|((_, v), (_, w))| (v / w - 1.0).abs()).collect();
        let pos = (case.position(&fit.params) - case.position(&case.truth)).abs() / case.width();
        if errs.iter().all(|e| *e < tolerance) && pos < tolerance {
            within += 1;
        }
        for (w, e) in worst.iter_mut().zip(&errs) {
            w.1 = w.1.max(*e);
        }
    }
    RoundTrip { model: case.model, trials, converged, within_tolerance: within, worst }
}
