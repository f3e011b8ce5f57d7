//! Full-quantum solver: Liouvillian, time evolution, steady state, regression
//! spectra and probe transmission.

pub mod density;
pub mod evolve;
pub mod probe;
pub mod shifted;
pub mod spectrum;
pub mod steady;
pub mod superop;

use serde::Serialize;

pub use density::{expectation, DensityMatrix};
pub use evolve::{evolve, evolve_with, Trajectory};
pub use probe::{probe_transmission, probe_transmission_with, ProbeOptions, ProbeResponse, ProbeScan};
pub use spectrum::{emission_spectrum, phonon_correlation, Correlation, Spectrum, SpectrumOptions};
pub use steady::steady_state;
pub use superop::{Sector, SuperOperator};

use crate::error::Result;
use crate::hilbert::Level;
use crate::model::{atomic_op, build_collapse_ops, build_hamiltonian, number_op, Channel};
use crate::operator::OperatorMatrix;
use crate::params::ModelParams;

/// `L` from a Hamiltonian and channels (angular units).
pub fn liouvillian(h: OperatorMatrix, channels: Vec<Channel>) -> Result<SuperOperator> {
    SuperOperator::new(h, channels)
}

/// Steady-state observables of the full model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadySummary {
    pub n_mean: f64,
    pub pop_g: f64,
    pub pop_e: f64,
    pub pop_f: f64,
    /// Weight on the highest Fock state, a truncation indicator.
    pub top_fock_weight: f64,
}

impl SteadySummary {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        let s = rho.space();
        let pop = |l: Level| expectation(rho, &atomic_op(s, l, l)).map(|v| v.re);
        let dist = rho.fock_distribution();
        Ok(Self {
            n_mean: expectation(rho, &number_op(s))?.re,
            pop_g: pop(Level::G)?,
            pop_e: pop(Level::E)?,
            pop_f: pop(Level::F)?,
            top_fock_weight: dist.last().copied().unwrap_or(0.0),
        })
    }
}

pub fn solve_steady(p: &ModelParams) -> Result<(SuperOperator, DensityMatrix)> {
    p.validate()?;
    let space = crate::hilbert::HilbertSpace::new(p.fock_cutoff)?;
    let l = SuperOperator::new(build_hamiltonian(p, space)?, build_collapse_ops(p, space)?)?;
    let rho = steady_state(&l)?;
    Ok((l, rho))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffCheck {
    pub cutoff: usize,
    pub larger_cutoff: usize,
    pub n_mean: f64,
    pub n_mean_larger: f64,
    pub relative_change: f64,
    pub converged: bool,
}

/// Re-solves with the cutoff raised by 25% and compares `⟨b†b⟩`. The run is
/// converged when the change is below 1%.
pub fn cutoff_convergence(p: &ModelParams) -> Result<CutoffCheck> {
    let (_, rho) = solve_steady(p)?;
    let larger = p.fock_cutoff + (p.fock_cutoff as f64 * 0.25).ceil().max(1.0) as usize;
    let (_, rho2) = solve_steady(&ModelParams { fock_cutoff: larger, ..p.clone() })?;
    let n1 = SteadySummary::of(&rho)?.n_mean;
    let n2 = SteadySummary::of(&rho2)?.n_mean;
    let rel = (n2 - n1).abs() / n2.abs().max(1e-12);
    Ok(CutoffCheck {
        cutoff: p.fock_cutoff,
        larger_cutoff: larger,
        n_mean: n1,
        n_mean_larger: n2,
        relative_change: rel,
        converged: rel < 0.01 || (n1 - n2).abs() < 1e-9,
    })
}
