//! Weak-probe transmission through the resonator.
//!
//! A probe `ε (b e^{iδ_p t} + b† e^{−iδ_p t})` is made static by moving to a
//! frame rotating at `δ_p` on the excitation number `Q = b†b + σ_ee`. Since
//! the model Hamiltonian and every collapse operator have a definite charge,
//! this frame change is exact: it adds `−δ_p Q` to `H`, which leaves the
//! charge-diagonal steady state untouched and shifts the sector of coherence
//! order `k` by `+i k δ_p`.
//!
//! The default solver is exact first-order (linear) response,
//! `(M₁ + i δ_p) ρ₁ = i[b†, ρ₀]`. A finite-ε solver that couples the sectors
//! `|k| ≤ K` by block Gauss–Seidel iteration is used to check linearity.
//!
//! The transmission is normalized as `t = i (κ/2) ⟨b⟩ / ε`, so that an empty
//! resonator gives `t = (κ/2) / (κ/2 − i δ_p)`, i.e. `|t| = 1` on resonance.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::density::DensityMatrix;
use crate::lindblad::shifted::ShiftedSolver;
use crate::lindblad::steady::{solve_with_trace, steady_state};
use crate::lindblad::superop::{Sector, SuperOperator};
use crate::model::mode_op;
use crate::operator::OperatorMatrix;
use crate::params::ModelParams;
use crate::units::angular;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    /// Probe amplitude (MHz) for the linearity check.
    pub epsilon: Option<f64>,
    /// Number of detunings at which the finite-amplitude solver checks the
    /// linear response. Zero disables the check.
    pub check_points: usize,
    /// Highest coherence order retained by the finite-amplitude solver.
    pub max_order: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { epsilon: None, check_points: 3, max_order: 4, tolerance: 1e-12, max_sweeps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeScan {
    /// MHz.
    pub detunings: Vec<f64>,
    pub t: Vec<C64>,
    /// `⟨b†b⟩` of the unprobed steady state.
    pub n_mean: f64,
    /// Largest relative change of `t` when ε is halved, at the check points.
    pub linearity_deviation: Option<f64>,
    /// Converts normalized `t` to `S21`: `2√(κ_in κ_out)/κ`.
    pub s21_scale: f64,
    pub warnings: Vec<String>,
}

/// Normalized transmission at each probe detuning (MHz).
pub fn probe_transmission(p: &ModelParams, detunings: &[f64]) -> Result<ProbeScan> {
    probe_transmission_with(p, detunings, &ProbeOptions::default())
}

fn check_params(p: &ModelParams) -> Result<()> {
    for (name, v) in [("kappa_in", p.kappa_in), ("kappa_out", p.kappa_out), ("kappa", p.kappa)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter { name: name.into(), reason: format!("probe transmission requires > 0, got {v}") });
        }
    }
    p.validate()
}

/// Linear-response machinery shared by all detunings of one parameter set.
pub struct ProbeResponse {
    l: SuperOperator,
    rho0: DensityMatrix,
    solver: ShiftedSolver,
    source: DVector<C64>,
    readout: DVector<C64>,
    kappa: f64,
}

impl ProbeResponse {
    pub fn new(p: &ModelParams) -> Result<Self> {
        check_params(p)?;
        let l = SuperOperator::from_params(p)?;
        if !l.is_charge_conserving() {
            return Err(Error::Unsupported("probe response requires a charge-conserving model".into()));
        }
        let rho0 = steady_state(&l)?;
        let space = l.space();
        let sector = Sector::coherence(space, 1);
        let m = l.sector_matrix(&sector)?;
        let bd = mode_op(space).adjoint();
        let comm = bd.mul_dense(rho0.matrix()) - bd.dense_mul(rho0.matrix());
        let source = DVector::from_vec(sector.pack(&(comm * C64::new(0.0, 1.0))));
        let readout = DVector::from_vec(sector.trace_functional(&mode_op(space)));
        Ok(Self { solver: ShiftedSolver::new(m), l, rho0, source, readout, kappa: angular(p.kappa) })
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn superoperator(&self) -> &SuperOperator {
        &self.l
    }

    /// `t(δ_p)` to first order in ε.
    pub fn transmission(&self, detuning: f64) -> Result<C64> {
        let shift = C64::new(0.0, angular(detuning));
        let x = self.solver.solve(shift, &self.source)?;
        let b_over_eps = self.readout.dot(&x);
        Ok(C64::new(0.0, 0.5 * self.kappa) * b_over_eps)
    }

    /// `t(δ_p)` at finite probe amplitude ε (MHz), retaining coherence
    /// orders up to `max_order`.
    pub fn transmission_finite(&self, detuning: f64, epsilon: f64, opts: &ProbeOptions) -> Result<C64> {
        let space = self.l.space();
        // Orders beyond the largest charge difference have empty sectors.
        let max_charge = (0..space.dim()).map(|i| space.charge(i)).max().unwrap_or(1);
        let kmax = (opts.max_order.max(1) as i64).min(max_charge);
        let eps = angular(epsilon);
        let wp = angular(detuning);
        let b = mode_op(space);
        let bd = b.adjoint();
        let orders: Vec<i64> = (-kmax..=kmax).collect();
        let sectors: Vec<Sector> = orders.iter().map(|&k| Sector::coherence(space, k)).collect();
        let mut lus = Vec::with_capacity(orders.len());
        let mut m0 = None;
        for (&k, s) in orders.iter().zip(&sectors) {
            let mut m = self.l.sector_matrix(s)?;
            if k == 0 {
                m0 = Some(m);
                lus.push(None);
            } else {
                for i in 0..m.nrows() {
                    m[(i, i)] += C64::new(0.0, k as f64 * wp);
                }
                lus.push(Some(m.lu()));
            }
        }
        let m0 = m0.expect("order 0 is always present");
        let d = space.dim();
        let mut blocks: Vec<DMatrix<C64>> = vec![DMatrix::zeros(d, d); orders.len()];
        blocks[kmax as usize] = self.rho0.matrix().clone();
        let comm = |op: &OperatorMatrix, x: &DMatrix<C64>| op.mul_dense(x) - op.dense_mul(x);
        let ieps = C64::new(0.0, eps);
        // Sweep 0, +1, ..., +K, −1, ..., −K so each order sees fresh neighbours.
        let sweep: Vec<usize> = std::iter::once(kmax as usize)
            .chain((1..=kmax).map(|k| (kmax + k) as usize))
            .chain((1..=kmax).map(|k| (kmax - k) as usize))
            .collect();
        let mut prev_t = C64::new(f64::NAN, 0.0);
        for _ in 0..opts.max_sweeps {
            for &idx in &sweep {
                let mut src = DMatrix::zeros(d, d);
                if idx + 1 < orders.len() {
                    src += comm(&b, &blocks[idx + 1]);
                }
                if idx > 0 {
                    src += comm(&bd, &blocks[idx - 1]);
                }
                let rhs = sectors[idx].pack(&(src * ieps));
                let x = match &lus[idx] {
                    None => solve_with_trace(&m0, &sectors[idx], Some(&rhs))?,
                    Some(lu) => lu
                        .solve(&DVector::from_vec(rhs))
                        .ok_or_else(|| Error::DegenerateSteadyState(format!("order {} block is singular", orders[idx])))?
                        .as_slice()
                        .to_vec(),
                };
                blocks[idx] = sectors[idx].unpack(&x);
            }
            let b_mean: C64 = b.iter().map(|(r, c, v)| v * blocks[(kmax + 1) as usize][(c, r)]).sum();
            let t = C64::new(0.0, 0.5 * self.kappa) * b_mean / eps;
            if (t - prev_t).norm() <= opts.tolerance * t.norm().max(1e-300) {
                return Ok(t);
            }
            prev_t = t;
        }
        Err(Error::NonConvergence(format!(
            "finite-amplitude probe solve did not settle in {} sweeps at detuning {detuning} MHz",
            opts.max_sweeps
        )))
    }
}

pub fn probe_transmission_with(p: &ModelParams, detunings: &[f64], opts: &ProbeOptions) -> Result<ProbeScan> {
    let resp = ProbeResponse::new(p)?;
    let t: Vec<C64> = detunings.par_iter().map(|&dp| resp.transmission(dp)).collect::<Result<_>>()?;
    let n_mean = resp.rho0.fock_distribution().iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    let mut warnings = Vec::new();
    let mut linearity_deviation = None;
    if opts.check_points > 0 && !detunings.is_empty() {
        let eps = opts.epsilon.unwrap_or(1e-4 * p.kappa);
        let picks = check_indices(&t, opts.check_points);
        let devs: Vec<f64> = picks
            .par_iter()
            .map(|&i| {
                let full = resp.transmission_finite(detunings[i], eps, opts)?;
                let half = resp.transmission_finite(detunings[i], 0.5 * eps, opts)?;
                Ok((full - half).norm() / half.norm().max(1e-12))
            })
            .collect::<Result<_>>()?;
        let worst = devs.into_iter().fold(0.0, f64::max);
        if worst > 0.01 {
            warnings.push(format!(
                "probe not in the linear regime: halving epsilon = {eps} MHz changes t by {:.2}%",
                100.0 * worst
            ));
        }
        linearity_deviation = Some(worst);
    }
    Ok(ProbeScan {
        detunings: detunings.to_vec(),
        t,
        n_mean,
        linearity_deviation,
        s21_scale: 2.0 * (p.kappa_in * p.kappa_out).sqrt() / p.kappa,
        warnings,
    })
}

/// The point of largest `|t|` plus evenly spread others.
fn check_indices(t: &[C64], count: usize) -> Vec<usize> {
    let n = t.len();
    let peak = (0..n).max_by(|&a, &b| t[a].norm().total_cmp(&t[b].norm())).unwrap_or(0);
    let mut picks = vec![peak];
    for i in 0..count.saturating_sub(1) {
        let idx = (i * (n - 1)) / count.saturating_sub(1).max(1);
        if !picks.contains(&idx) {
            picks.push(idx);
        }
    }
    picks.truncate(count.min(n));
    picks
}
