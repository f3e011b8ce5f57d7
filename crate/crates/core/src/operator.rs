//! Sparse complex operators on a [`HilbertSpace`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;

/// Square operator in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: HilbertSpace,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl OperatorMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        space: HilbertSpace,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let dim = space.dim();
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            *rows[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != C64::new(0.0, 0.0) {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { space, row_ptr, col_idx, values }
    }

    pub fn zero(space: HilbertSpace) -> Self {
        Self::from_triplets(space, std::iter::empty())
    }

    pub fn identity(space: HilbertSpace) -> Self {
        Self::from_triplets(space, (0..space.dim()).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Non-zero entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// All non-zero entries as `(row, col, value)`, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.space, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// Transpose without conjugation; its rows are the columns of `self`.
    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.space, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.prune()
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn prune(self) -> Self {
        Self::from_triplets(self.space, self.iter().collect::<Vec<_>>())
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self::from_triplets(self.space, self.iter().chain(other.iter())))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Ok(Self::from_triplets(self.space, triplets))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry of `self − self†` in absolute value.
    pub fn hermiticity_error(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// The constant change `charge(row) − charge(col)` shared by every entry,
    /// if one exists. An operator with no entries has shift 0.
    pub fn charge_shift(&self) -> Option<i64> {
        let mut shift = None;
        for (r, c, _) in self.iter() {
            let s = self.space.charge(r) - self.space.charge(c);
            match shift {
                None => shift = Some(s),
                Some(prev) if prev != s => return None,
                _ => {}
            }
        }
        Some(shift.unwrap_or(0))
    }

    /// `self · x` for a dense column-major matrix.
    pub fn mul_dense(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let dim = self.dim();
        assert_eq!(x.nrows(), dim);
        let mut out = DMatrix::zeros(dim, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            let mut oc = out.column_mut(j);
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for (c, v) in self.row(r) {
                    acc += v * xc[c];
                }
                oc[r] = acc;
            }
        }
        out
    }

    /// `x · self` for a dense column-major matrix.
    pub fn dense_mul(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let dim = self.dim();
        assert_eq!(x.ncols(), dim);
        let mut out = DMatrix::zeros(x.nrows(), dim);
        for k in 0..dim {
            let xk = x.column(k);
            for (j, v) in self.row(k) {
                out.column_mut(j).axpy(v, &xk, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `x · self†` for a dense column-major matrix.
    pub fn dense_mul_adjoint(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let dim = self.dim();
        assert_eq!(x.ncols(), dim);
        let mut out = DMatrix::zeros(x.nrows(), dim);
        // (x A†)_{ij} = Σ_k x_ik conj(A_jk)
        for j in 0..dim {
            let mut oj = out.column_mut(j);
            for (k, v) in self.row(j) {
                oj.axpy(v.conj(), &x.column(k), C64::new(1.0, 0.0));
            }
        }
        out
    }
}
