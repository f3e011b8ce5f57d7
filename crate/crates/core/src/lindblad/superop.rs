//! The Liouvillian and its block structure.
//!
//! Every operator of the model changes the excitation charge by a fixed
//! amount, so the Liouvillian maps `|a⟩⟨b|` only to elements with the same
//! coherence order `k = q(a) − q(b)`. Each order is an invariant sector; the
//! steady state lives in `k = 0`, the first-order probe response in `k = +1`
//! and the emission correlation in `k = −1`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;
use crate::model::{build_collapse_ops, build_hamiltonian, Channel};
use crate::operator::OperatorMatrix;
use crate::params::ModelParams;

/// Largest sector assembled as a dense matrix (about 144 MB).
pub const MAX_DENSE_SECTOR: usize = 3000;

/// A set of matrix elements `|a⟩⟨b|` closed under the Liouvillian.
#[derive(Debug, Clone)]
pub struct Sector {
    order: Option<i64>,
    dim: usize,
    pairs: Vec<(usize, usize)>,
    lookup: HashMap<(usize, usize), usize>,
}

impl Sector {
    /// All elements with `q(a) − q(b) = k`.
    pub fn coherence(space: HilbertSpace, k: i64) -> Self {
        let d = space.dim();
        let pairs = (0..d)
            .flat_map(|b| (0..d).map(move |a| (a, b)))
            .filter(|&(a, b)| space.charge(a) - space.charge(b) == k)
            .collect();
        Self::from_pairs(Some(k), d, pairs)
    }

    /// Every element, in column-major order.
    pub fn full(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self::from_pairs(None, d, (0..d).flat_map(|b| (0..d).map(move |a| (a, b))).collect())
    }

    fn from_pairs(order: Option<i64>, dim: usize, pairs: Vec<(usize, usize)>) -> Self {
        let lookup = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Self { order, dim, pairs, lookup }
    }

    pub fn order(&self) -> Option<i64> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a, b)).copied()
    }

    pub fn pack(&self, m: &DMatrix<C64>) -> Vec<C64> {
        self.pairs.iter().map(|&(a, b)| m[(a, b)]).collect()
    }

    pub fn unpack(&self, v: &[C64]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(a, b), &x) in self.pairs.iter().zip(v) {
            m[(a, b)] = x;
        }
        m
    }

    /// Largest element of `m` outside the sector.
    pub fn leakage(&self, m: &DMatrix<C64>) -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..m.ncols() {
            for a in 0..m.nrows() {
                if self.position(a, b).is_none() {
                    worst = worst.max(m[(a, b)].norm());
                }
            }
        }
        worst
    }

    /// Coefficients `w` such that `tr(O X) = Σ w_i x_i` for `X` in the sector.
    pub fn trace_functional(&self, op: &OperatorMatrix) -> Vec<C64> {
        // tr(O X) = Σ_{a,b} O_ba X_ab
        self.pairs.iter().map(|&(a, b)| op.get(b, a)).collect()
    }
}

/// `L ρ = −i(H_eff ρ − ρ H_eff†) + Σ γ c ρ c†` with
/// `H_eff = H − (i/2) Σ γ c†c`, all in angular units.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    space: HilbertSpace,
    hamiltonian: OperatorMatrix,
    h_eff: OperatorMatrix,
    /// Transpose of `h_eff`; row `a` lists column `a` of `h_eff`.
    h_eff_cols: OperatorMatrix,
    channels: Vec<Channel>,
    channel_cols: Vec<OperatorMatrix>,
    charge_conserving: bool,
}

impl SuperOperator {
    pub fn new(hamiltonian: OperatorMatrix, channels: Vec<Channel>) -> Result<Self> {
        let space = hamiltonian.space();
        for ch in &channels {
            if ch.op.space() != space {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: ch.op.dim() });
            }
            if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
                return Err(Error::InvalidParameter { name: "rate".into(), reason: format!("{}", ch.rate) });
            }
        }
        let mut h_eff = hamiltonian.clone();
        for ch in &channels {
            let cdc = ch.op.adjoint().try_mul(&ch.op)?;
            h_eff = h_eff.try_add(&cdc.scale(C64::new(0.0, -0.5 * ch.rate)))?;
        }
        let charge_conserving = hamiltonian.charge_shift() == Some(0)
            && channels.iter().all(|c| c.op.charge_shift().is_some());
        let h_eff_cols = h_eff.transpose();
        let channel_cols = channels.iter().map(|c| c.op.transpose()).collect();
        Ok(Self { space, hamiltonian, h_eff, h_eff_cols, channels, channel_cols, charge_conserving })
    }

    pub fn from_params(p: &ModelParams) -> Result<Self> {
        let space = HilbertSpace::new(p.fock_cutoff)?;
        Self::new(build_hamiltonian(p, space)?, build_collapse_ops(p, space)?)
    }

    /// Same dissipation, Hamiltonian replaced by `H + extra`.
    pub fn with_extra_hamiltonian(&self, extra: &OperatorMatrix) -> Result<Self> {
        Self::new(self.hamiltonian.try_add(extra)?, self.channels.clone())
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// True when the Hamiltonian conserves the excitation charge and every
    /// collapse operator shifts it by a fixed amount, so that coherence
    /// sectors are invariant.
    pub fn is_charge_conserving(&self) -> bool {
        self.charge_conserving
    }

    /// Upper bound on the modulus of every eigenvalue (angular units).
    pub fn spectral_bound(&self) -> f64 {
        let d = self.space.dim();
        // max(‖A‖₁, ‖A‖∞) bounds the spectral norm of A.
        let norm = |op: &OperatorMatrix| {
            let mut rows = vec![0.0; d];
            let mut cols = vec![0.0; d];
            for (r, c, v) in op.iter() {
                rows[r] += v.norm();
                cols[c] += v.norm();
            }
            rows.into_iter().chain(cols).fold(0.0, f64::max)
        };
        let mut bound = 2.0 * norm(&self.h_eff);
        for ch in &self.channels {
            bound += ch.rate * norm(&ch.op).powi(2);
        }
        bound
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mi = C64::new(0.0, -1.0);
        let mut out = (self.h_eff.mul_dense(rho) - self.h_eff.dense_mul_adjoint(rho)) * mi;
        for ch in &self.channels {
            let c_rho = ch.op.mul_dense(rho);
            out += ch.op.dense_mul_adjoint(&c_rho) * C64::new(ch.rate, 0.0);
        }
        out
    }

    /// The sector of coherence order `k`, or the full space when the model
    /// breaks charge conservation (only allowed for small spaces).
    pub fn sector(&self, k: i64) -> Result<Sector> {
        if self.charge_conserving {
            Ok(Sector::coherence(self.space, k))
        } else {
            let d = self.space.dim();
            if d * d > MAX_DENSE_SECTOR {
                return Err(Error::TooLarge(format!(
                    "model does not conserve excitation number; the full Liouvillian ({} elements) exceeds the dense limit {MAX_DENSE_SECTOR}",
                    d * d
                )));
            }
            Ok(Sector::full(self.space))
        }
    }

    /// The restriction of `L` to `sector` as a dense matrix.
    pub fn sector_matrix(&self, sector: &Sector) -> Result<DMatrix<C64>> {
        let n = sector.len();
        if n > MAX_DENSE_SECTOR {
            return Err(Error::TooLarge(format!(
                "sector of {n} elements exceeds the dense limit {MAX_DENSE_SECTOR}; lower fock_cutoff"
            )));
        }
        let mut m = DMatrix::<C64>::zeros(n, n);
        let leak = |a: usize, b: usize| {
            Error::InvalidState(format!("element ({a}, {b}) leaves the sector; the model is not charge-conserving"))
        };
        let mi = C64::new(0.0, -1.0);
        for (j, &(a, b)) in sector.pairs().iter().enumerate() {
            // −i H_eff |a⟩⟨b|
            for (a2, v) in self.h_eff_cols.row(a) {
                let i = sector.position(a2, b).ok_or_else(|| leak(a2, b))?;
                m[(i, j)] += mi * v;
            }
            // +i |a⟩⟨b| H_eff† = +i |a⟩ (H_eff |b⟩)†
            for (b2, v) in self.h_eff_cols.row(b) {
                let i = sector.position(a, b2).ok_or_else(|| leak(a, b2))?;
                m[(i, j)] -= mi * v.conj();
            }
            for (ch, cols) in self.channels.iter().zip(&self.channel_cols) {
                for (a2, va) in cols.row(a) {
                    for (b2, vb) in cols.row(b) {
                        let i = sector.position(a2, b2).ok_or_else(|| leak(a2, b2))?;
                        m[(i, j)] += va * vb.conj() * ch.rate;
                    }
                }
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Level;
    use crate::model::{atomic_op, mode_op, ChannelKind};

    fn params() -> ModelParams {
        ModelParams {
            omega_pump: 40.0,
            delta_ge: 1.5,
            delta_gf: -2.0,
            gamma_phi_e: 0.7,
            kappa: 0.8,
            g_fe: Some(3.0),
            delta_anharm: -50.0,
            fock_cutoff: 3,
            ..Default::default()
        }
    }

    fn test_matrix(d: usize) -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |i, j| C64::new((i as f64 * 0.37 + j as f64).sin(), (i as f64 - 0.5 * j as f64).cos()))
    }

    #[test]
    fn sectors_reproduce_the_full_action() {
        let l = SuperOperator::from_params(&params()).unwrap();
        assert!(l.is_charge_conserving());
        let d = l.space().dim();
        let x = test_matrix(d);
        let full = l.apply(&x);
        let qmax = l.space().fock_cutoff() as i64 + 1;
        let mut total = 0;
        for k in -qmax..=qmax {
            let s = l.sector(k).unwrap();
            total += s.len();
            let m = l.sector_matrix(&s).unwrap();
            let y = &m * nalgebra::DVector::from_vec(s.pack(&x));
            let expect = s.pack(&full);
            let err = y.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "k = {k}: {err}");
        }
        assert_eq!(total, d * d);
    }

    #[test]
    fn full_sector_matches_apply_and_preserves_trace() {
        let p = params();
        let l = SuperOperator::from_params(&p).unwrap();
        let s = Sector::full(l.space());
        let m = l.sector_matrix(&s).unwrap();
        let d = l.space().dim();
        let x = test_matrix(d);
        let y = s.unpack((&m * nalgebra::DVector::from_vec(s.pack(&x))).as_slice());
        assert!((y - l.apply(&x)).norm() < 1e-9);
        assert!(l.apply(&x).trace().norm() < 1e-9);
    }

    #[test]
    fn symmetry_breaking_term_is_detected() {
        let space = HilbertSpace::new(2).unwrap();
        let b = mode_op(space);
        let drive = b.try_add(&b.adjoint()).unwrap();
        let ch = vec![Channel::new(ChannelKind::ResonatorLoss, b, 1.0)];
        let l = SuperOperator::new(drive, ch).unwrap();
        assert!(!l.is_charge_conserving());
        assert_eq!(l.sector(0).unwrap().len(), 81);
        let x = atomic_op(space, Level::G, Level::G);
        let h = SuperOperator::new(x.clone(), vec![]).unwrap();
        let s = Sector::coherence(space, 0);
        assert!(h.sector_matrix(&s).is_ok());
        let bad = SuperOperator::new(x, vec![Channel::new(ChannelKind::ResonatorLoss, mode_op(space).try_add(&mode_op(space).adjoint()).unwrap(), 1.0)]).unwrap();
        assert!(bad.sector_matrix(&s).is_err());
    }

    #[test]
    fn spectral_bound_covers_the_spectrum() {
        let l = SuperOperator::from_params(&ModelParams { fock_cutoff: 2, ..params() }).unwrap();
        let s = Sector::full(l.space());
        let m = l.sector_matrix(&s).unwrap();
        let bound = l.spectral_bound();
        let ev = m.schur().eigenvalues().unwrap();
        for z in ev.iter() {
            assert!(z.norm() <= bound * (1.0 + 1e-9));
        }
    }
}
