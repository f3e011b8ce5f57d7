//! Figure presets.
//!
//! Full-quantum presets that need a pumped, lasing steady state use "desk"
//! parameters: the device's atomic rates and coupling with κ raised so that
//! the phonon number, and hence the Fock cutoff, stays small. Presets that
//! only need linear response around the vacuum, or that use the mean-field
//! and analytic solvers, run at the device parameters.

use saser_core::params::device;
use saser_core::ModelParams;
use serde::Serialize;

use crate::config::{Axis, Experiment, Options, OutputSpec, RunSpec, Solver, Spacing, FREQUENCY, PROBE_DETUNING};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Why this solver, and how the parameters were scaled if at all.
    pub solver_rationale: &'static str,
    pub spec: RunSpec,
}

pub const NAMES: &[&str] = &["fig3a", "fig3b", "fig3d", "fig4a", "fig4b", "figS4", "figS4_desk", "estimates"];

/// κ (MHz) of the pumped-probe desk instance: ⟨n⟩ ≈ 1.5 at Ω = 120 MHz.
pub const DESK_PROBE_KAPPA: f64 = 2.0;
pub const DESK_PROBE_OMEGA: f64 = 120.0;
/// κ (MHz) of the emission desk instance: ⟨n⟩ ≈ 10 at Ω = 100 MHz.
pub const DESK_EMISSION_KAPPA: f64 = 0.5;
pub const DESK_EMISSION_OMEGA: f64 = 100.0;

fn spec(name: &str, experiment: Experiment, solver: Solver, params: ModelParams, axes: Vec<Axis>, options: Options) -> RunSpec {
    RunSpec {
        preset: Some(name.to_string()),
        experiment,
        solver: Some(solver),
        params,
        axes,
        options,
        output: OutputSpec::default(),
    }
}

fn desk_probe() -> ModelParams {
    ModelParams { kappa: DESK_PROBE_KAPPA, omega_pump: DESK_PROBE_OMEGA, fock_cutoff: 30, ..Default::default() }
}

fn desk_emission() -> ModelParams {
    ModelParams { kappa: DESK_EMISSION_KAPPA, omega_pump: DESK_EMISSION_OMEGA, fock_cutoff: 40, ..Default::default() }
}

fn threshold() -> f64 {
    (device::GAMMA_FE * device::GAMMA_EG).sqrt()
}

pub fn find(name: &str) -> Result<Preset> {
    let p = match name {
        "fig3a" => Preset {
            name: "fig3a",
            description: "Avoided crossing: probe transmission |t| over atom detuning and probe detuning, pump off",
            solver_rationale: "full_quantum at the device parameters (kappa_0 = 0.134 MHz). With the pump off the \
                steady state is the vacuum and the linear probe response only reaches the one-phonon manifold, \
                so a cutoff of 3 is exact and no scaling is needed.",
            spec: spec(
                "fig3a",
                Experiment::RabiMap,
                Solver::FullQuantum,
                ModelParams { fock_cutoff: 3, ..Default::default() },
                vec![Axis::linear("delta_ge", -120.0, 120.0, 49), Axis::linear(PROBE_DETUNING, -60.0, 60.0, 481)],
                Options::default(),
            ),
        },
        "fig3b" => Preset {
            name: "fig3b",
            description: "Hot-spots: probe transmission |t| over atom detuning and probe detuning, pump on",
            solver_rationale: "full_quantum on a desk instance. At kappa_0 the pumped steady state holds about 100 \
                phonons and needs a cutoff near 300, beyond a map of dense solves; kappa is raised to 2 MHz \
                (<n> ~ 1.5, cutoff 30) with the device atom rates, g and Omega = 120 MHz. The pump tracks the \
                g-f transition (delta_gf = 0 in every cell); options.pump_detuning_slope = 1 instead holds the \
                pump frequency fixed while omega_gf follows omega_ge.",
            spec: spec(
                "fig3b",
                Experiment::HotspotMap,
                Solver::FullQuantum,
                desk_probe(),
                vec![Axis::linear("delta_ge", -60.0, 60.0, 25), Axis::linear(PROBE_DETUNING, -30.0, 30.0, 241)],
                Options::default(),
            ),
        },
        "fig3d" => Preset {
            name: "fig3d",
            description: "Amplification: |t| pump on versus pump off along the probe detuning at delta_ge = 0",
            solver_rationale: "full_quantum on the fig3b desk instance (kappa = 2 MHz, Omega = 120 MHz, cutoff 30). \
                The absolute gain depends on the port couplings, so only |t|_on > 1 > |t|_off is meaningful.",
            spec: spec(
                "fig3d",
                Experiment::GainProfile,
                Solver::FullQuantum,
                desk_probe(),
                vec![Axis::linear(PROBE_DETUNING, -30.0, 30.0, 601)],
                Options::default(),
            ),
        },
        "fig4a" => Preset {
            name: "fig4a",
            description: "Emission map: regression power spectral density over atom detuning and frequency",
            solver_rationale: "full_quantum on a desk instance. Device-scale lasing (about 90 phonons) needs a cutoff \
                near 300; kappa is raised to 0.5 MHz with Omega = 100 MHz so that <n> ~ 10 at cutoff 40. With \
                the device atom rates a kappa of 2 MHz or more would leave <n> below 2, too few for a lasing \
                line.",
            spec: spec(
                "fig4a",
                Experiment::EmissionMap,
                Solver::FullQuantum,
                desk_emission(),
                vec![Axis::linear("delta_ge", -40.0, 40.0, 17), Axis::linear(FREQUENCY, -2.0, 2.0, 401)],
                Options::default(),
            ),
        },
        "fig4b" => Preset {
            name: "fig4b",
            description: "Emission spectrum at delta_ge = 0 with a Voigt fit and the FWHM",
            solver_rationale: "full_quantum on the fig4a desk instance (kappa = 0.5 MHz, Omega = 100 MHz, \
                cutoff 40, <n> ~ 10); the linewidth is compared with 2 kappa / sqrt(2 <n>).",
            spec: spec(
                "fig4b",
                Experiment::EmissionSpectrum,
                Solver::FullQuantum,
                desk_emission(),
                vec![Axis::linear(FREQUENCY, -2.5, 2.5, 1001)],
                Options::default(),
            ),
        },
        "figS4" => Preset {
            name: "figS4",
            description: "Phonon number and linewidth guide versus pump amplitude at the device parameters",
            solver_rationale: "semiclassical at the device parameters with kappa_m = 0.094 MHz and the Purcell \
                loss folded in (kappa_eff = 2 kappa_m). About 90 phonons are out of reach of a dense \
                full-quantum solve; mean field is the large-N limit. Mean field has no phase diffusion, so the \
                FWHM column is the analytic guide 2 kappa_m / sqrt(2 N).",
            spec: spec(
                "figS4",
                Experiment::PumpSweep,
                Solver::Semiclassical,
                ModelParams { kappa: device::KAPPA_MULTI_PHONON, ..Default::default() },
                vec![Axis { spacing: Spacing::Log, ..Axis::linear("omega_pump", 0.3 * threshold(), 30.0 * threshold(), 60) }],
                Options { fold_purcell: true, ..Options::default() },
            ),
        },
        "figS4_desk" => Preset {
            name: "figS4_desk",
            description: "Phonon number and regression linewidth versus pump amplitude on the emission desk instance",
            solver_rationale: "both solvers on the fig4a desk instance (kappa = 0.5 MHz, cutoff 40), so the \
                full-quantum linewidth and phonon number can be set against mean field over the threshold.",
            spec: spec(
                "figS4_desk",
                Experiment::PumpSweep,
                Solver::Both,
                desk_emission(),
                vec![Axis { spacing: Spacing::Log, ..Axis::linear("omega_pump", 20.0, 400.0, 14) }],
                Options::default(),
            ),
        },
        "estimates" => Preset {
            name: "estimates",
            description: "Analytic lasing estimates for kappa_0 and kappa_m, with the mean-field optimum",
            solver_rationale: "semiclassical: the closed-form estimators plus a mean-field optimum search with the \
                Purcell loss folded into kappa.",
            spec: spec(
                "estimates",
                Experiment::EstimatesReport,
                Solver::Semiclassical,
                ModelParams::default(),
                vec![Axis::linear("kappa", device::KAPPA_SINGLE_PHONON, device::KAPPA_MULTI_PHONON, 2)],
                Options { fold_purcell: true, ..Options::default() },
            ),
        },
        other => {
            return Err(CliError::validation(format!("unknown preset `{other}`; available: {}", NAMES.join(", "))))
        }
    };
    Ok(p)
}

pub fn all() -> Vec<Preset> {
    NAMES.iter().map(|n| find(n).expect("listed preset exists")).collect()
}
