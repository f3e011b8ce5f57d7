use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level};
use crate::operator::OperatorMatrix;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// A state on the composite space: Hermitian, unit trace, positive
/// semidefinite up to the tolerances above.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates all three invariants.
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.check()?;
        Ok(rho)
    }

    /// Checks only the dimension. Used for trajectory snapshots, where the
    /// invariants are monitored separately.
    pub fn new_unchecked(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian: max |ρ − ρ†| = {herm:e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn pure(space: HilbertSpace, psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / C64::new(norm, 0.0);
        Self::new(space, &psi * psi.adjoint())
    }

    pub fn basis(space: HilbertSpace, level: Level, n: usize) -> Self {
        let mut m = DMatrix::zeros(space.dim(), space.dim());
        let i = space.index(level, n);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self { space, matrix: m }
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self { space, matrix: DMatrix::identity(d, d) / C64::new(d as f64, 0.0) }
    }

    /// `ρ_atom ⊗ ρ_mode`. The mode factor is given on `n_max + 1` Fock states.
    pub fn product(space: HilbertSpace, atom: &Matrix3<C64>, mode: &DMatrix<C64>) -> Result<Self> {
        let nf = space.n_fock();
        if mode.nrows() != nf || mode.ncols() != nf {
            return Err(Error::DimensionMismatch { expected: nf, found: mode.nrows() });
        }
        let m = DMatrix::from_fn(space.dim(), space.dim(), |r, c| {
            atom[(r / nf, c / nf)] * mode[(r % nf, c % nf)]
        });
        Self::new(space, m)
    }

    /// Thermal (geometric) mode occupation, renormalized on the truncated space.
    pub fn thermal_mode(space: HilbertSpace, level: Level, n_mean: f64) -> Result<Self> {
        if !(n_mean >= 0.0) {
            return Err(Error::InvalidState(format!("mean occupation {n_mean} < 0")));
        }
        let ratio = n_mean / (1.0 + n_mean);
        let weights: Vec<f64> = (0..space.n_fock()).map(|n| ratio.powi(n as i32)).collect();
        let z: f64 = weights.iter().sum();
        let mut m = DMatrix::zeros(space.dim(), space.dim());
        for (n, w) in weights.iter().enumerate() {
            let i = space.index(level, n);
            m[(i, i)] = C64::new(w / z, 0.0);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian_part().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: other.space.dim() });
        }
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * herm.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Reduced atomic state, indexed g, e, f.
    pub fn atom_reduced(&self) -> Matrix3<C64> {
        let nf = self.space.n_fock();
        Matrix3::from_fn(|a, b| (0..nf).map(|n| self.matrix[(a * nf + n, b * nf + n)]).sum())
    }

    /// Phonon-number distribution.
    pub fn fock_distribution(&self) -> Vec<f64> {
        let nf = self.space.n_fock();
        (0..nf).map(|n| (0..3).map(|a| self.matrix[(a * nf + n, a * nf + n)].re).sum()).collect()
    }
}

/// `tr(ρ O)`.
pub fn expectation(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C64> {
    if rho.space != op.space() {
        return Err(Error::DimensionMismatch { expected: rho.space.dim(), found: op.dim() });
    }
    Ok(op.iter().map(|(r, c, v)| v * rho.matrix[(c, r)]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{atomic_op, mode_op, number_op};

    #[test]
    fn expectations_on_basis_states() {
        let s = HilbertSpace::new(5).unwrap();
        let rho = DensityMatrix::basis(s, Level::G, 3);
        assert_eq!(expectation(&rho, &number_op(s)).unwrap().re, 3.0);
        assert_eq!(expectation(&rho, &OperatorMatrix::identity(s)).unwrap().re, 1.0);
        let b = mode_op(s);
        let bdb = b.adjoint().try_mul(&b).unwrap();
        assert!((expectation(&rho, &bdb).unwrap().re - 3.0).abs() < 1e-12);
        let other = HilbertSpace::new(4).unwrap();
        assert!(expectation(&rho, &OperatorMatrix::identity(other)).is_err());
    }

    #[test]
    fn populations_sum_to_one() {
        let s = HilbertSpace::new(3).unwrap();
        let rho = DensityMatrix::maximally_mixed(s);
        let total: f64 = Level::ALL
            .iter()
            .map(|&l| expectation(&rho, &atomic_op(s, l, l)).unwrap().re)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_are_enforced() {
        let s = HilbertSpace::new(1).unwrap();
        let mut m = DMatrix::<C64>::identity(6, 6) / C64::new(6.0, 0.0);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(s, m.clone()).is_err());
        m[(1, 0)] = C64::new(0.0, -0.1);
        assert!(DensityMatrix::new(s, m.clone()).is_ok());
        m[(0, 0)] = C64::new(-0.1, 0.0);
        m[(5, 5)] += C64::new(0.1 + 1.0 / 6.0, 0.0);
        assert!(DensityMatrix::new(s, m).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let s = HilbertSpace::new(2).unwrap();
        let a = DensityMatrix::basis(s, Level::G, 0);
        let b = DensityMatrix::basis(s, Level::E, 1);
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-12);
        assert!(a.trace_distance(&a).unwrap() < 1e-15);
    }
}
