//! Repeated solves of `(M + σ I) x = r` for many shifts σ.
//!
//! `M = Q H Q†` is reduced once to upper Hessenberg form; each shifted system
//! then costs O(n²) instead of a fresh O(n³) factorization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    q: DMatrix<C64>,
    h: DMatrix<C64>,
    scale: f64,
}

impl ShiftedSolver {
    pub fn new(m: DMatrix<C64>) -> Self {
        let scale = m.camax();
        let (q, h) = m.hessenberg().unpack();
        Self { q, h, scale }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn solve(&self, shift: C64, rhs: &DVector<C64>) -> Result<DVector<C64>> {
        let n = self.dim();
        let mut a = self.h.clone();
        for i in 0..n {
            a[(i, i)] += shift;
        }
        let mut y = self.q.ad_mul(rhs);
        // Gaussian elimination with partial pivoting between adjacent rows.
        for j in 0..n.saturating_sub(1) {
            if a[(j + 1, j)].norm() > a[(j, j)].norm() {
                for c in j..n {
                    let tmp = a[(j, c)];
                    a[(j, c)] = a[(j + 1, c)];
                    a[(j + 1, c)] = tmp;
                }
                y.swap_rows(j, j + 1);
            }
            let piv = a[(j, j)];
            if piv.norm() == 0.0 {
                continue;
            }
            let l = a[(j + 1, j)] / piv;
            if l.norm() != 0.0 {
                for c in j..n {
                    let v = a[(j, c)];
                    a[(j + 1, c)] -= l * v;
                }
                let v = y[j];
                y[j + 1] -= l * v;
            }
        }
        let tol = 1e-14 * (self.scale + shift.norm());
        for i in (0..n).rev() {
            let mut acc = y[i];
            for c in i + 1..n {
                acc -= a[(i, c)] * y[c];
            }
            let piv = a[(i, i)];
            if !(piv.norm() > tol) {
                return Err(Error::DegenerateSteadyState(format!("shifted system is singular at shift {shift}")));
            }
            y[i] = acc / piv;
        }
        Ok(&self.q * y)
    }
}
