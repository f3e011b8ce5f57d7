//! Atomic and mode operators, the rotating-frame Hamiltonian and the Lindblad
//! channels.
//!
//! The frame co-rotates with the resonator on `b†b + σ_ee` and with the pump
//! on `σ_ff`. In that frame, with ħ = 1,
//!
//! ```text
//! H = δ_ge σ_ee + δ_gf σ_ff + (Ω/2)(σ_gf + σ_fg) + g (σ_eg b + σ_ge b†)
//! ```
//!
//! where `σ_ij = |i⟩⟨j|`. The coupling exchanges `|e,n⟩ ↔ |g,n+1⟩`. With a
//! resonant pump (`δ_gf = 0`) the `σ_ff` term vanishes.
//!
//! The optional e↔f coupling `g_fe` is far detuned by Δ and cannot be made
//! static in the same frame as the pump. It enters through its adiabatic
//! elimination: a dispersive term `(g_fe²/Δ)[σ_ff (b†b + 1) − σ_ee b†b]` and a
//! phonon-loss channel `σ_ee b` at rate `κ_Purc = g_fe² Γ_fe / Δ²`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level};
use crate::operator::OperatorMatrix;
use crate::params::ModelParams;
use crate::semiclassical;
use crate::units::{angular, from_angular};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `σ_ij ⊗ I_Fock`.
pub fn atomic_op(space: HilbertSpace, i: Level, j: Level) -> OperatorMatrix {
    OperatorMatrix::from_triplets(
        space,
        (0..space.n_fock()).map(|n| (space.index(i, n), space.index(j, n), re(1.0))),
    )
}

/// `I_atom ⊗ b`, with `b|n⟩ = √n |n−1⟩`.
pub fn mode_op(space: HilbertSpace) -> OperatorMatrix {
    OperatorMatrix::from_triplets(
        space,
        Level::ALL.iter().flat_map(|&l| {
            (1..space.n_fock()).map(move |n| (space.index(l, n - 1), space.index(l, n), re((n as f64).sqrt())))
        }),
    )
}

/// `I_atom ⊗ b†b`.
pub fn number_op(space: HilbertSpace) -> OperatorMatrix {
    OperatorMatrix::from_triplets(
        space,
        (0..space.dim()).map(|i| (i, i, re(space.decompose(i).1 as f64))),
    )
}

/// Checks `g_fe` against Δ and returns it when the extension is enabled.
fn explicit_g_fe(p: &ModelParams) -> Result<Option<f64>> {
    match p.g_fe {
        Some(g_fe) if g_fe != 0.0 => {
            if p.delta_anharm == 0.0 {
                return Err(Error::DegenerateDetuning);
            }
            Ok(Some(g_fe))
        }
        _ => Ok(None),
    }
}

/// Hamiltonian in angular units (rad/µs).
pub fn build_hamiltonian(p: &ModelParams, space: HilbertSpace) -> Result<OperatorMatrix> {
    let mut t: Vec<(usize, usize, C64)> = Vec::new();
    let nf = space.n_fock();
    let (de, df) = (angular(p.delta_ge), angular(p.delta_gf));
    let half_pump = angular(p.omega_pump) / 2.0;
    let g = angular(p.g);
    for n in 0..nf {
        let (gn, en, fnn) = (space.index(Level::G, n), space.index(Level::E, n), space.index(Level::F, n));
        t.push((en, en, re(de)));
        t.push((fnn, fnn, re(df)));
        t.push((gn, fnn, re(half_pump)));
        t.push((fnn, gn, re(half_pump)));
        if n + 1 < nf {
            let c = re(g * ((n + 1) as f64).sqrt());
            let g_up = space.index(Level::G, n + 1);
            // σ_ge b† |e,n⟩ = √(n+1) |g,n+1⟩ and its conjugate.
            t.push((g_up, en, c));
            t.push((en, g_up, c));
        }
    }
    if let Some(g_fe) = explicit_g_fe(p)? {
        let chi = angular(g_fe * g_fe / p.delta_anharm);
        for n in 0..nf {
            let nn = n as f64;
            t.push((space.index(Level::F, n), space.index(Level::F, n), re(chi * (nn + 1.0))));
            t.push((space.index(Level::E, n), space.index(Level::E, n), re(-chi * nn)));
        }
    }
    Ok(OperatorMatrix::from_triplets(space, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    /// Relaxation `from → to` through `σ_{to,from}`.
    Relaxation { from: Level, to: Level },
    /// Pure dephasing of one level through `σ_ll`.
    Dephasing(Level),
    /// Resonator energy loss through `b`.
    ResonatorLoss,
    /// Phonon absorption via the detuned e↔f transition, `σ_ee b`.
    PurcellLoss,
}

/// A collapse operator with its rate. `rate` is angular (1/µs).
#[derive(Debug, Clone)]
pub struct Channel {
    pub kind: ChannelKind,
    pub op: OperatorMatrix,
    pub rate: f64,
}

impl Channel {
    pub fn new(kind: ChannelKind, op: OperatorMatrix, rate: f64) -> Self {
        Self { kind, op, rate }
    }

    /// Rate in the configuration convention (MHz, `/2π`).
    pub fn rate_mhz(&self) -> f64 {
        from_angular(self.rate)
    }
}

/// Lindblad channels with non-zero rate. Dephasing channels run at twice the
/// configured rate so that the coherence decays at `gamma_phi`.
pub fn build_collapse_ops(p: &ModelParams, space: HilbertSpace) -> Result<Vec<Channel>> {
    let rates = [
        ("gamma_eg", p.gamma_eg),
        ("gamma_fg", p.gamma_fg),
        ("gamma_fe", p.gamma_fe),
        ("gamma_phi_e", p.gamma_phi_e),
        ("gamma_phi_f", p.gamma_phi_f),
        ("kappa", p.kappa),
    ];
    for (name, r) in rates {
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter { name: name.into(), reason: format!("rate must be >= 0, got {r}") });
        }
    }
    use Level::*;
    let mut out = Vec::new();
    let mut push = |kind, op: OperatorMatrix, rate_mhz: f64| {
        if rate_mhz > 0.0 {
            out.push(Channel::new(kind, op, angular(rate_mhz)));
        }
    };
    push(ChannelKind::Relaxation { from: E, to: G }, atomic_op(space, G, E), p.gamma_eg);
    push(ChannelKind::Relaxation { from: F, to: G }, atomic_op(space, G, F), p.gamma_fg);
    push(ChannelKind::Relaxation { from: F, to: E }, atomic_op(space, E, F), p.gamma_fe);
    push(ChannelKind::ResonatorLoss, mode_op(space), p.kappa);
    push(ChannelKind::Dephasing(E), atomic_op(space, E, E), 2.0 * p.gamma_phi_e);
    push(ChannelKind::Dephasing(F), atomic_op(space, F, F), 2.0 * p.gamma_phi_f);
    if explicit_g_fe(p)?.is_some() {
        let op = atomic_op(space, E, E).try_mul(&mode_op(space))?;
        push(ChannelKind::PurcellLoss, op, semiclassical::purcell_kappa(p)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    /// Γ_fe > Γ_eg: the e level is fed faster than it drains.
    pub inversion_capable: bool,
    /// Γ_fe ≫ Γ_fg, taken as a factor of at least 5.
    pub f_decays_mostly_to_e: bool,
    /// Maximum phonon number estimate with κ as given, if inversion holds.
    pub n_pn_estimate: Option<f64>,
}

impl ParamReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_params(p: &ModelParams) -> ParamReport {
    let violations: Vec<String> = p.violations().iter().map(|e| e.to_string()).collect();
    let mut warnings = Vec::new();
    let inversion_capable = p.gamma_fe > p.gamma_eg;
    let f_decays_mostly_to_e = p.gamma_fe >= 5.0 * p.gamma_fg;
    let n_pn_estimate = if inversion_capable && p.kappa > 0.0 {
        semiclassical::phonon_number_estimate(p, false).ok()
    } else {
        None
    };
    if let Some(n) = n_pn_estimate {
        if (p.fock_cutoff as f64) < 3.0 * n {
            warnings.push(format!(
                "fock_cutoff = {} is below 3x the estimated phonon number {:.1}; full-quantum results will be truncated",
                p.fock_cutoff, n
            ));
        }
    }
    if p.kappa == 0.0 {
        warnings.push("kappa = 0: steady-state solves are undefined".to_string());
    }
    if p.g_fe.is_some_and(|g| g != 0.0) && p.delta_anharm == 0.0 {
        warnings.push(Error::DegenerateDetuning.to_string());
    }
    ParamReport { violations, warnings, inversion_capable, f_decays_mostly_to_e, n_pn_estimate }
}
