//! Physical and numerical parameters of the atom–resonator model.
//!
//! All frequencies and rates are cyclic frequencies in MHz (see
//! [`crate::units`]). Detunings follow the convention `δ = ω_transition − ω_reference`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Measured device values, in MHz unless stated otherwise.
pub mod device {
    /// Resonator frequency. Display metadata only: the dynamics use detunings.
    pub const RESONATOR_FREQUENCY_MHZ: f64 = 3210.0;
    /// Resonator decay rate in the single-phonon regime (Q = 24e3).
    pub const KAPPA_SINGLE_PHONON: f64 = 0.134;
    /// Resonator decay rate in the multi-phonon regime (Q = 34e3).
    pub const KAPPA_MULTI_PHONON: f64 = 0.094;
    pub const Q_SINGLE_PHONON: f64 = 24.0e3;
    pub const Q_MULTI_PHONON: f64 = 34.0e3;
    /// External quality factor of the output port.
    pub const Q_OUT: f64 = 2.4e6;
    pub const G: f64 = 11.0;
    pub const GAMMA_EG: f64 = 35.0;
    pub const GAMMA_FG: f64 = 6.0;
    pub const GAMMA_FE: f64 = 100.0;
    /// Optimal pump amplitude from the numerical model.
    pub const OMEGA_OPTIMAL_NUMERICAL: f64 = 290.0;
    /// Optimal pump amplitude measured independently.
    pub const OMEGA_OPTIMAL_MEASURED: f64 = 270.0;
    /// Largest phonon number inferred from the emitted power.
    pub const N_PHONON_MAX_MEASURED: f64 = 90.0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// ω_ge − ω_r.
    pub delta_ge: f64,
    /// ω_gf − ω_pump; zero for a resonant pump.
    pub delta_gf: f64,
    /// g↔e coupling to the mode.
    pub g: f64,
    /// Pump amplitude Ω on g↔f. The Hamiltonian carries Ω/2.
    pub omega_pump: f64,
    pub gamma_eg: f64,
    pub gamma_fg: f64,
    pub gamma_fe: f64,
    /// Pure dephasing of |e⟩ (coherence decay rate).
    pub gamma_phi_e: f64,
    /// Pure dephasing of |f⟩ (coherence decay rate).
    pub gamma_phi_f: f64,
    /// Total resonator energy decay rate.
    pub kappa: f64,
    pub kappa_in: f64,
    pub kappa_out: f64,
    /// e↔f coupling to the mode; `None` disables the extension.
    pub g_fe: Option<f64>,
    /// Δ = ω_ef − ω_r.
    pub delta_anharm: f64,
    /// Fock truncation n_max.
    pub fock_cutoff: usize,
}

impl Default for ModelParams {
    /// Device parameters at resonance with the pump off and κ = κ_0.
    fn default() -> Self {
        let kappa_port = device::RESONATOR_FREQUENCY_MHZ / device::Q_OUT;
        Self {
            delta_ge: 0.0,
            delta_gf: 0.0,
            g: device::G,
            omega_pump: 0.0,
            gamma_eg: device::GAMMA_EG,
            gamma_fg: device::GAMMA_FG,
            gamma_fe: device::GAMMA_FE,
            gamma_phi_e: 0.0,
            gamma_phi_f: 0.0,
            kappa: device::KAPPA_SINGLE_PHONON,
            kappa_in: kappa_port,
            kappa_out: kappa_port,
            g_fe: None,
            delta_anharm: 0.0,
            fock_cutoff: 10,
        }
    }
}

/// Names accepted by [`ModelParams::get`] and [`ModelParams::set`].
pub const PARAM_NAMES: &[&str] = &[
    "delta_ge",
    "delta_gf",
    "g",
    "omega_pump",
    "gamma_eg",
    "gamma_fg",
    "gamma_fe",
    "gamma_phi_e",
    "gamma_phi_f",
    "kappa",
    "kappa_in",
    "kappa_out",
    "g_fe",
    "delta_anharm",
    "fock_cutoff",
];

impl ModelParams {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "delta_ge" => self.delta_ge,
            "delta_gf" => self.delta_gf,
            "g" => self.g,
            "omega_pump" => self.omega_pump,
            "gamma_eg" => self.gamma_eg,
            "gamma_fg" => self.gamma_fg,
            "gamma_fe" => self.gamma_fe,
            "gamma_phi_e" => self.gamma_phi_e,
            "gamma_phi_f" => self.gamma_phi_f,
            "kappa" => self.kappa,
            "kappa_in" => self.kappa_in,
            "kappa_out" => self.kappa_out,
            "g_fe" => self.g_fe.unwrap_or(0.0),
            "delta_anharm" => self.delta_anharm,
            "fock_cutoff" => self.fock_cutoff as f64,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: format!("value {value} is not finite"),
            });
        }
        match name {
            "delta_ge" => self.delta_ge = value,
            "delta_gf" => self.delta_gf = value,
            "g" => self.g = value,
            "omega_pump" => self.omega_pump = value,
            "gamma_eg" => self.gamma_eg = value,
            "gamma_fg" => self.gamma_fg = value,
            "gamma_fe" => self.gamma_fe = value,
            "gamma_phi_e" => self.gamma_phi_e = value,
            "gamma_phi_f" => self.gamma_phi_f = value,
            "kappa" => self.kappa = value,
            "kappa_in" => self.kappa_in = value,
            "kappa_out" => self.kappa_out = value,
            "g_fe" => self.g_fe = Some(value),
            "delta_anharm" => self.delta_anharm = value,
            "fock_cutoff" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: name.to_string(),
                        reason: format!("must be a non-negative integer, got {value}"),
                    });
                }
                self.fock_cutoff = value as usize;
            }
            _ => {
                return Err(Error::InvalidParameter {
                    name: name.to_string(),
                    reason: "unknown parameter".to_string(),
                })
            }
        }
        Ok(())
    }

    /// Hard constraints. Returns every violation, not just the first.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        let mut bad = |name: &str, reason: String| {
            out.push(Error::InvalidParameter { name: name.to_string(), reason })
        };
        for &name in PARAM_NAMES {
            let v = self.get(name).unwrap();
            if !v.is_finite() {
                bad(name, format!("value {v} is not finite"));
            }
        }
        let rates = [
            ("gamma_eg", self.gamma_eg),
            ("gamma_fg", self.gamma_fg),
            ("gamma_fe", self.gamma_fe),
            ("gamma_phi_e", self.gamma_phi_e),
            ("gamma_phi_f", self.gamma_phi_f),
            ("kappa", self.kappa),
            ("kappa_in", self.kappa_in),
            ("kappa_out", self.kappa_out),
        ];
        for (name, r) in rates {
            if r < 0.0 {
                bad(name, format!("rate must be >= 0, got {r}"));
            }
        }
        if self.g < 0.0 {
            bad("g", format!("coupling must be >= 0, got {}", self.g));
        }
        if self.omega_pump < 0.0 {
            bad("omega_pump", format!("pump amplitude must be >= 0, got {}", self.omega_pump));
        }
        if let Some(g_fe) = self.g_fe {
            if g_fe < 0.0 {
                bad("g_fe", format!("coupling must be >= 0, got {g_fe}"));
            }
        }
        if self.fock_cutoff < 1 {
            bad("fock_cutoff", "must be >= 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Copy with the Purcell contribution folded into `kappa` and the explicit
    /// e↔f coupling removed.
    pub fn with_effective_kappa(&self) -> Result<Self> {
        let mut p = self.clone();
        p.kappa = crate::semiclassical::effective_kappa(self)?;
        p.g_fe = None;
        Ok(p)
    }

    /// Short stable hash of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("params serialize");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }
}
