//! Adaptive Dormand–Prince 5(4) integration of complex ODE systems.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dopri5 {
    pub tol: Tolerances,
    /// First trial step; estimated from the RHS when `None`.
    pub h_init: Option<f64>,
    /// Steps smaller than `h_min * max(1, |t|)` abort the integration.
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { tol: Tolerances::default(), h_init: None, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for &(c, k) in terms {
            acc += k[i] * c;
        }
        out[i] = y[i] + acc * h;
    }
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { tol: Tolerances { rtol, atol }, ..Default::default() }
    }

    fn error_norm(&self, y: &[C64], y_new: &[C64], err: &[C64]) -> f64 {
        let n = y.len().max(1) as f64;
        let sum: f64 = y
            .iter()
            .zip(y_new)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = self.tol.atol + self.tol.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    /// Integrates `dy/dt = f(t, y)` from `t_grid[0]`, calling `on_output` at
    /// every grid time (including the first). Steps are clipped so the grid
    /// is hit exactly.
    pub fn integrate<F, O>(&self, mut f: F, t_grid: &[f64], y0: &[C64], mut on_output: O) -> Result<Stats>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        O: FnMut(usize, f64, &[C64]),
    {
        let n = y0.len();
        let mut stats = Stats::default();
        if t_grid.is_empty() {
            return Ok(stats);
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("time grid must be strictly increasing".into()));
        }
        let mut t = t_grid[0];
        let mut y = y0.to_vec();
        on_output(0, t, &y);
        if t_grid.len() == 1 {
            return Ok(stats);
        }

        let mut k = vec![vec![C64::new(0.0, 0.0); n]; 7];
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        let mut y_new = vec![C64::new(0.0, 0.0); n];
        let mut err = vec![C64::new(0.0, 0.0); n];
        f(t, &y, &mut k[0]);
        stats.rhs_evals += 1;

        let span = t_grid[t_grid.len() - 1] - t;
        let mut h = match self.h_init {
            Some(h) => h,
            None => {
                let d0 = self.error_norm(&y, &y, &y);
                let d1 = self.error_norm(&y, &y, &k[0]);
                let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
                guess.min(span)
            }
        }
        .min(self.h_max);

        let mut next = 1;
        let mut steps = 0usize;
        while next < t_grid.len() {
            let target = t_grid[next];
            let mut hit = false;
            let mut h_step = h;
            if t + h_step >= target {
                h_step = target - t;
                hit = true;
            }
            if h_step < self.h_min * t.abs().max(1.0) {
                return Err(Error::Integration { t, h: h_step, steps, reason: "step size underflow".into() });
            }
            if steps >= self.max_steps {
                return Err(Error::Integration { t, h: h_step, steps, reason: "maximum step count exceeded".into() });
            }
            steps += 1;

            let (k_all, _) = k.split_at_mut(7);
            let [k1, k2, k3, k4, k5, k6, k7] = k_all else { unreachable!() };
            combine(&mut tmp, &y, h_step, &[(A21, &k1[..])]);
            f(t + C2 * h_step, &tmp, k2);
            combine(&mut tmp, &y, h_step, &[(A31, &k1[..]), (A32, &k2[..])]);
            f(t + C3 * h_step, &tmp, k3);
            combine(&mut tmp, &y, h_step, &[(A41, &k1[..]), (A42, &k2[..]), (A43, &k3[..])]);
            f(t + C4 * h_step, &tmp, k4);
            combine(&mut tmp, &y, h_step, &[(A51, &k1[..]), (A52, &k2[..]), (A53, &k3[..]), (A54, &k4[..])]);
            f(t + C5 * h_step, &tmp, k5);
            combine(&mut tmp, &y, h_step, &[(A61, &k1[..]), (A62, &k2[..]), (A63, &k3[..]), (A64, &k4[..]), (A65, &k5[..])]);
            f(t + h_step, &tmp, k6);
            combine(&mut y_new, &y, h_step, &[(B1, &k1[..]), (B3, &k3[..]), (B4, &k4[..]), (B5, &k5[..]), (B6, &k6[..])]);
            f(t + h_step, &y_new, k7);
            stats.rhs_evals += 6;
            for i in 0..n {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h_step;
            }
            let e = self.error_norm(&y, &y_new, &err);
            if !e.is_finite() {
                stats.rejected += 1;
                h = h_step * 0.1;
                continue;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                stats.accepted += 1;
                t = if hit { target } else { t + h_step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(k1, k7);
                if hit {
                    on_output(next, t, &y);
                    next += 1;
                    // Keep the unclipped step for the next interval.
                    h = h.max(h_step * factor).min(self.h_max);
                } else {
                    h = (h_step * factor).min(self.h_max);
                }
            } else {
                stats.rejected += 1;
                h = h_step * factor.min(1.0);
            }
        }
        Ok(stats)
    }
}
