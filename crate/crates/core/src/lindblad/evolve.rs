use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lindblad::density::DensityMatrix;
use crate::lindblad::superop::SuperOperator;
use crate::ode::{Dopri5, Stats};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: Stats,
    /// Largest `|tr ρ − 1|` over the outputs.
    pub max_trace_drift: f64,
    /// Largest `max |ρ − ρ†|` over the outputs.
    pub max_hermiticity_error: f64,
}

/// Integrates the master equation and returns the state at each time in
/// `t_grid` (µs), starting from `rho0` at `t_grid[0]`.
pub fn evolve(rho0: &DensityMatrix, l: &SuperOperator, t_grid: &[f64]) -> Result<Vec<DensityMatrix>> {
    Ok(evolve_with(rho0, l, t_grid, &Dopri5::default())?.states)
}

pub fn evolve_with(rho0: &DensityMatrix, l: &SuperOperator, t_grid: &[f64], integrator: &Dopri5) -> Result<Trajectory> {
    let space = l.space();
    if rho0.space() != space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: rho0.space().dim() });
    }
    let d = space.dim();
    let mut states = Vec::with_capacity(t_grid.len());
    let mut snapshot_err = None;
    let stats = integrator.integrate(
        |_, y, dy| {
            let rho = DMatrix::from_column_slice(d, d, y);
            dy.copy_from_slice(l.apply(&rho).as_slice());
        },
        t_grid,
        rho0.matrix().as_slice(),
        |_, _, y| match DensityMatrix::new_unchecked(space, DMatrix::from_column_slice(d, d, y)) {
            Ok(s) => states.push(s),
            Err(e) => snapshot_err = Some(e),
        },
    )?;
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    let max_trace_drift = states
        .iter()
        .map(|s| (s.trace() - C64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    let max_hermiticity_error = states.iter().map(DensityMatrix::hermiticity_error).fold(0.0, f64::max);
    Ok(Trajectory { times: t_grid.to_vec(), states, stats, max_trace_drift, max_hermiticity_error })
}
