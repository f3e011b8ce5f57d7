#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64 as C64;
use rand::Rng;
use saser_core::lindblad::DensityMatrix;
use saser_core::HilbertSpace;

pub fn random_density<R: Rng>(space: HilbertSpace, rng: &mut R) -> DensityMatrix {
    let d = space.dim();
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(space, m / tr).unwrap()
}

pub fn random_atom<R: Rng>(rng: &mut R) -> Matrix3<C64> {
    let g = Matrix3::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = g * g.adjoint();
    let tr = m.trace();
    m / tr
}

/// Truncated coherent state `|β⟩⟨β|`, renormalized.
pub fn coherent(cutoff: usize, beta: C64) -> DMatrix<C64> {
    let mut v = DVector::zeros(cutoff + 1);
    let mut c = C64::new(1.0, 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            c *= beta / (n as f64).sqrt();
        }
        v[n] = c;
    }
    let v = &v / C64::new(v.norm(), 0.0);
    &v * v.adjoint()
}

/// Local maxima of `y`, refined by a parabola through the three samples.
pub fn peaks(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..y.len() - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| {
            let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
            let h = x[i + 1] - x[i];
            let den = a - 2.0 * b + c;
            let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            (x[i] + off * h, b - 0.25 * (a - c) * off)
        })
        .collect()
}
