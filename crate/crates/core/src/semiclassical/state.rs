use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Factorized state: atomic expectation values `s_ij = ⟨σ_ij⟩` and the mode
/// amplitude `β = ⟨b⟩`. The remaining coherences follow from
/// `s_ji = conj(s_ij)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SemiclassicalState {
    pub s_gg: f64,
    pub s_ee: f64,
    pub s_ff: f64,
    pub s_ge: C64,
    pub s_gf: C64,
    pub s_ef: C64,
    pub beta: C64,
}

/// Populations of g, e and f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub g: f64,
    pub e: f64,
    pub f: f64,
}

pub const POPULATION_TOL: f64 = 1e-6;

impl SemiclassicalState {
    /// Atom in g, mode amplitude `beta`.
    pub fn ground(beta: C64) -> Self {
        Self { s_gg: 1.0, beta, ..Default::default() }
    }

    /// The documented seed for above-threshold solves: atom in g, `β = 0.1`.
    pub fn seed() -> Self {
        Self::ground(C64::new(0.1, 0.0))
    }

    pub fn populations(&self) -> Populations {
        Populations { g: self.s_gg, e: self.s_ee, f: self.s_ff }
    }

    pub fn n_pn(&self) -> f64 {
        self.beta.norm_sqr()
    }

    pub fn check(&self) -> Result<()> {
        let vals = [self.s_gg, self.s_ee, self.s_ff];
        let total: f64 = vals.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("populations sum to {total}")));
        }
        if vals.iter().any(|&v| !(-POPULATION_TOL..=1.0 + POPULATION_TOL).contains(&v)) {
            return Err(Error::InvalidState(format!("population outside [0, 1]: {vals:?}")));
        }
        if ![self.s_ge, self.s_gf, self.s_ef, self.beta].iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(())
    }

    /// Atomic density matrix indexed g, e, f: `ρ_ji = s_ij`.
    pub fn atom_matrix(&self) -> Matrix3<C64> {
        let r = |x: f64| C64::new(x, 0.0);
        Matrix3::new(
            r(self.s_gg), self.s_ge.conj(), self.s_gf.conj(),
            self.s_ge, r(self.s_ee), self.s_ef.conj(),
            self.s_gf, self.s_ef, r(self.s_ff),
        )
    }

    /// Inverse of [`Self::atom_matrix`]. Diagonal entries keep only their real
    /// part and coherences are read from the lower triangle.
    pub fn from_atom_matrix(rho: &Matrix3<C64>, beta: C64) -> Self {
        Self {
            s_gg: rho[(0, 0)].re,
            s_ee: rho[(1, 1)].re,
            s_ff: rho[(2, 2)].re,
            s_ge: rho[(1, 0)],
            s_gf: rho[(2, 0)],
            s_ef: rho[(2, 1)],
            beta,
        }
    }

    /// The U(1) action: `β` and `s_ge` pick up `e^{iφ}`, `s_ef` picks up
    /// `e^{−iφ}`, populations and `s_gf` are invariant.
    pub fn rotated(&self, phi: f64) -> Self {
        let u = C64::from_polar(1.0, phi);
        Self { beta: self.beta * u, s_ge: self.s_ge * u, s_ef: self.s_ef * u.conj(), ..*self }
    }

    pub(crate) fn to_vec(self) -> [C64; 10] {
        let m = self.atom_matrix();
        let mut out = [C64::new(0.0, 0.0); 10];
        out[..9].copy_from_slice(m.as_slice());
        out[9] = self.beta;
        out
    }

    pub(crate) fn from_slice(y: &[C64]) -> Self {
        let m = Matrix3::from_column_slice(&y[..9]);
        Self::from_atom_matrix(&m, y[9])
    }

    /// Largest difference in any component.
    pub fn distance(&self, other: &Self) -> f64 {
        self.to_vec().iter().zip(other.to_vec().iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}
