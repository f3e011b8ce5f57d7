use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lindblad::density::DensityMatrix;
use crate::lindblad::superop::{Sector, SuperOperator};

/// Ratio of smallest to largest LU pivot below which the kernel of `L` is
/// considered more than one-dimensional.
pub const PIVOT_RATIO_TOL: f64 = 1e-13;
/// Relative residual `‖L ρ‖ / (‖L‖ ‖ρ‖)` accepted for the solution.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Solves `L ρ = 0` with `tr ρ = 1` in the charge-diagonal sector. One
/// equation of the singular system is replaced by the trace condition.
pub fn steady_state(l: &SuperOperator) -> Result<DensityMatrix> {
    let sector = l.sector(0)?;
    let m = l.sector_matrix(&sector)?;
    let x = solve_with_trace(&m, &sector, None)?;
    finish(l, &sector, &x)
}

/// Solves `M x = rhs` where one row of `M` (the first diagonal element) is
/// replaced by the trace functional with value 1. `rhs` defaults to zero.
pub(crate) fn solve_with_trace(m: &DMatrix<C64>, sector: &Sector, rhs: Option<&[C64]>) -> Result<Vec<C64>> {
    let n = sector.len();
    let diag: Vec<usize> = sector
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| a == b)
        .map(|(i, _)| i)
        .collect();
    let Some(&r0) = diag.first() else {
        return Err(Error::InvalidState("sector holds no diagonal elements".into()));
    };
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateSteadyState("the Liouvillian is zero".into()));
    }
    let mut a = m.clone();
    for j in 0..n {
        a[(r0, j)] = C64::new(0.0, 0.0);
    }
    for &j in &diag {
        a[(r0, j)] = C64::new(scale, 0.0);
    }
    let mut b = match rhs {
        Some(r) => DVector::from_column_slice(r),
        None => DVector::zeros(n),
    };
    b[r0] = C64::new(scale, 0.0);

    let lu = a.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = u.diagonal().iter().map(|v| v.norm()).collect();
    let pmax = pivots.iter().copied().fold(0.0, f64::max);
    let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(pmin > PIVOT_RATIO_TOL * pmax) {
        return Err(Error::DegenerateSteadyState(format!(
            "pivot ratio {:.2e}: the kernel of L is not one-dimensional",
            pmin / pmax
        )));
    }
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::DegenerateSteadyState("singular system".into()))?;
    let resid = (&a * &x - &b).camax() / (scale * x.camax().max(1e-300));
    if !(resid < RESIDUAL_TOL) {
        return Err(Error::DegenerateSteadyState(format!("residual {resid:.2e} after solve")));
    }
    Ok(x.as_slice().to_vec())
}

fn finish(l: &SuperOperator, sector: &Sector, x: &[C64]) -> Result<DensityMatrix> {
    let m = sector.unpack(x);
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = herm.trace();
    let rho = herm / tr;
    DensityMatrix::new(l.space(), rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertSpace, Level};
    use crate::lindblad::density::expectation;
    use crate::model::{atomic_op, mode_op, number_op, Channel, ChannelKind};
    use crate::operator::OperatorMatrix;
    use crate::params::ModelParams;

    #[test]
    fn damped_resonator_relaxes_to_vacuum() {
        let s = HilbertSpace::new(4).unwrap();
        // The atom must be pinned too, so add a decay to g from both levels.
        let ch = vec![
            Channel::new(ChannelKind::ResonatorLoss, mode_op(s), 1.0),
            Channel::new(ChannelKind::Relaxation { from: Level::E, to: Level::G }, atomic_op(s, Level::G, Level::E), 1.0),
            Channel::new(ChannelKind::Relaxation { from: Level::F, to: Level::G }, atomic_op(s, Level::G, Level::F), 1.0),
        ];
        let l = SuperOperator::new(OperatorMatrix::zero(s), ch).unwrap();
        let rho = steady_state(&l).unwrap();
        let vac = DensityMatrix::basis(s, Level::G, 0);
        assert!(rho.trace_distance(&vac).unwrap() < 1e-12);
    }

    #[test]
    fn zero_liouvillian_is_degenerate() {
        let s = HilbertSpace::new(2).unwrap();
        let l = SuperOperator::new(OperatorMatrix::zero(s), vec![]).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::DegenerateSteadyState(_))));
        // Resonator loss alone leaves the atomic populations free.
        let l = SuperOperator::new(OperatorMatrix::zero(s), vec![Channel::new(ChannelKind::ResonatorLoss, mode_op(s), 1.0)]).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::DegenerateSteadyState(_))));
    }

    #[test]
    fn pumped_model_is_a_valid_state_in_the_kernel() {
        let p = ModelParams { omega_pump: 80.0, kappa: 0.6, fock_cutoff: 12, ..Default::default() };
        let l = SuperOperator::from_params(&p).unwrap();
        let rho = steady_state(&l).unwrap();
        let lr = l.apply(rho.matrix());
        assert!(lr.camax() < 1e-8, "{}", lr.camax());
        let n = expectation(&rho, &number_op(rho.space())).unwrap();
        assert!(n.re > 0.5, "{n}");
        assert!(n.im.abs() < 1e-12);
    }
}
