//! Closed-form lasing estimators. All rates are MHz (`/2π`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::semiclassical::state::Populations;

/// Phonon loss through the detuned e↔f transition, `g_fe² Γ_fe / Δ²`.
/// Without an explicit `g_fe` this returns κ itself, i.e. the effective loss
/// is doubled.
pub fn purcell_kappa(p: &ModelParams) -> Result<f64> {
    match p.g_fe {
        None => Ok(p.kappa),
        Some(g_fe) => {
            if p.delta_anharm == 0.0 {
                return Err(Error::DegenerateDetuning);
            }
            Ok(g_fe * g_fe * p.gamma_fe / (p.delta_anharm * p.delta_anharm))
        }
    }
}

/// `κ + κ_Purc`.
pub fn effective_kappa(p: &ModelParams) -> Result<f64> {
    Ok(p.kappa + purcell_kappa(p)?)
}

/// `(Γ_fe − Γ_eg) / (3 κ)`, with κ replaced by the effective κ on request.
pub fn phonon_number_estimate(p: &ModelParams, apply_purcell: bool) -> Result<f64> {
    if !(p.gamma_fe > p.gamma_eg) {
        return Err(Error::NoInversion { gamma_fe: p.gamma_fe, gamma_eg: p.gamma_eg });
    }
    let kappa = if apply_purcell { effective_kappa(p)? } else { p.kappa };
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter { name: "kappa".into(), reason: format!("must be > 0, got {kappa}") });
    }
    Ok((p.gamma_fe - p.gamma_eg) / (3.0 * kappa))
}

/// Pump strength at which the bare atom reaches inversion, `√(Γ_fe Γ_eg)`.
pub fn lasing_threshold(p: &ModelParams) -> f64 {
    (p.gamma_fe * p.gamma_eg).sqrt()
}

/// Pump heuristic `Ω = 2 g √N`.
pub fn optimal_pump_heuristic(g: f64, n_pn: f64) -> f64 {
    2.0 * g * n_pn.max(0.0).sqrt()
}

/// `(2κ/√(2N), κ/(2N))`: the empirical guide and the Schawlow–Townes limit,
/// in the units of κ.
pub fn linewidth_estimate(n_pn: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(n_pn > 0.0) {
        return Err(Error::InvalidParameter { name: "n_pn".into(), reason: format!("must be > 0, got {n_pn}") });
    }
    Ok((2.0 * kappa / (2.0 * n_pn).sqrt(), kappa / (2.0 * n_pn)))
}

/// Relative violation of `Γ_fe s_ff − Γ_eg s_ee = κ N`. Zero gain and zero
/// loss give zero.
pub fn rate_balance_residual(pop: &Populations, n_pn: f64, p: &ModelParams) -> f64 {
    let num = p.gamma_fe * pop.f - p.gamma_eg * pop.e - p.kappa * n_pn;
    let den = p.kappa * n_pn + 1e-12 * p.gamma_fe.abs().max(p.gamma_eg.abs()).max(1.0);
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LasingEstimates {
    /// Closed-form phonon number with the Purcell-adjusted κ.
    pub n_pn_max: f64,
    /// MHz.
    pub omega_threshold: f64,
    /// `2 g √n_pn_max` (MHz).
    pub omega_optimal: f64,
    /// MHz.
    pub kappa_purcell: f64,
    /// `2κ/√(2 n_pn_max)` in kHz, with κ as given.
    pub fwhm_estimate: f64,
    /// `κ/(2 n_pn_max)` in kHz.
    pub fwhm_schawlow_townes: f64,
}

impl LasingEstimates {
    pub fn from_params(p: &ModelParams) -> Result<Self> {
        let n = phonon_number_estimate(p, true)?;
        let (guide, st) = linewidth_estimate(n, p.kappa)?;
        Ok(Self {
            n_pn_max: n,
            omega_threshold: lasing_threshold(p),
            omega_optimal: optimal_pump_heuristic(p.g, n),
            kappa_purcell: purcell_kappa(p)?,
            fwhm_estimate: guide * 1e3,
            fwhm_schawlow_townes: st * 1e3,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::device;

    fn device_kappa_m() -> ModelParams {
        ModelParams { kappa: device::KAPPA_MULTI_PHONON, ..Default::default() }
    }

    #[test]
    fn eq3_with_and_without_purcell() {
        let p = device_kappa_m();
        let n = phonon_number_estimate(&p, false).unwrap();
        assert!((n - 65.0 / (3.0 * 0.094)).abs() < 1e-9 && (n - 230.5).abs() < 0.1);
        let n2 = phonon_number_estimate(&p, true).unwrap();
        assert!((n2 - n / 2.0).abs() < 1e-9);
        let q = ModelParams { gamma_fe: 35.0, ..p };
        assert!(matches!(phonon_number_estimate(&q, false), Err(Error::NoInversion { .. })));
    }

    #[test]
    fn purcell_rate() {
        let p = ModelParams { g_fe: Some(10.0), gamma_fe: 100.0, delta_anharm: 100.0, ..device_kappa_m() };
        assert!((purcell_kappa(&p).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(purcell_kappa(&device_kappa_m()).unwrap(), 0.094);
        let far = ModelParams { delta_anharm: 1e12, ..p.clone() };
        assert!(purcell_kappa(&far).unwrap() < 1e-18);
        let zero = ModelParams { delta_anharm: 0.0, ..p };
        assert_eq!(purcell_kappa(&zero).unwrap_err(), Error::DegenerateDetuning);
    }

    #[test]
    fn threshold_and_linewidths() {
        assert!((lasing_threshold(&device_kappa_m()) - 59.16).abs() < 0.01);
        let sym = ModelParams { gamma_fe: 7.0, gamma_eg: 7.0, ..device_kappa_m() };
        assert!((lasing_threshold(&sym) - 7.0).abs() < 1e-12);
        let (guide, st) = linewidth_estimate(90.0, 94.0).unwrap();
        assert!((guide - 14.0).abs() < 0.1, "{guide}");
        assert!((st - 0.52).abs() < 0.01, "{st}");
        let (g2, s2) = linewidth_estimate(1e12, 94.0).unwrap();
        assert!(g2 < 1e-3 && s2 < 1e-9);
        assert!(linewidth_estimate(0.0, 1.0).is_err());
    }

    #[test]
    fn balance_residual_degenerate_input() {
        let pop = Populations { g: 1.0, e: 0.0, f: 0.0 };
        assert_eq!(rate_balance_residual(&pop, 0.0, &device_kappa_m()), 0.0);
        let pop = Populations { g: 0.4, e: 0.3, f: 0.3 };
        let n = (100.0 * 0.3 - 35.0 * 0.3) / 0.094;
        assert!(rate_balance_residual(&pop, n, &device_kappa_m()).abs() < 1e-12);
    }

    #[test]
    fn estimates_bundle() {
        let e = LasingEstimates::from_params(&device_kappa_m()).unwrap();
        assert!(e.n_pn_max > 0.0);
        assert!(e.fwhm_schawlow_townes <= e.fwhm_estimate);
        assert!((e.kappa_purcell - 0.094).abs() < 1e-15);
    }
}
