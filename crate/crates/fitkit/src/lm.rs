//! Bounded Levenberg–Marquardt least squares.
//!
//! Each iteration solves `(JᵀJ + λ D) δ = −Jᵀr` with `D = diag(JᵀJ)`
//! (Marquardt scaling), clamps the trial point to the bounds and accepts it
//! when the cost decreases. The Jacobian is a central difference with step
//! `ε^{1/3} · max(|p_j|, s_j)` for a per-parameter scale `s_j`.
//!
//! Convergence: the relative step `max_j |δ_j| / (|p_j| + s_j)` falls below
//! `xtol`, or the scaled gradient `max_j |J_jᵀ r| / (‖J_j‖ ‖r‖)` falls below
//! `gtol`. Parameters on a bound whose gradient points outward are held
//! there and excluded from both tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub xtol: f64,
    pub gtol: f64,
    /// Reciprocal condition number of the column-scaled Jacobian below
    /// which the problem is declared rank-deficient. Central differences
    /// leave exactly dependent columns about 1e-11 apart, hence the margin.
    pub rcond: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, xtol: 1e-10, gtol: 1e-10, rcond: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Standard error of every parameter; zero for fixed ones.
    pub stderr: Vec<f64>,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub message: String,
}

pub struct Problem<'a> {
    pub residual: &'a dyn Fn(&[f64]) -> Option<Vec<f64>>,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixed: Vec<bool>,
    pub scales: Vec<f64>,
}

struct State<'a, 'b> {
    problem: &'b Problem<'a>,
    free: Vec<usize>,
    evaluations: usize,
}

impl State<'_, '_> {
    fn residual(&mut self, x: &[f64]) -> Option<DVector<f64>> {
        self.evaluations += 1;
        let r = (self.problem.residual)(x)?;
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }

    fn jacobian(&mut self, x: &[f64], m: usize) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(m, self.free.len());
        let base = f64::EPSILON.cbrt();
        for (c, &j) in self.free.clone().iter().enumerate() {
            let h = base * x[j].abs().max(self.problem.scales[j]);
            // One-sided at an active bound.
            let (lo, hi) = (self.problem.lower[j], self.problem.upper[j]);
            let xp = (x[j] + h).min(hi);
            let xm = (x[j] - h).max(lo);
            let mut y = x.to_vec();
            y[j] = xp;
            let rp = self.residual(&y);
            y[j] = xm;
            let rm = self.residual(&y);
            let (Some(rp), Some(rm)) = (rp, rm) else {
                return Err(FitError::InvalidParameter {
                    name: self.problem.names[j].clone(),
                    reason: "model undefined next to the current value".into(),
                });
            };
            jac.set_column(c, &((rp - rm) / (xp - xm)));
        }
        Ok(jac)
    }
}

/// Reciprocal condition number of `jac` after scaling columns to unit norm,
/// and the free-parameter indices dominating the weakest direction.
fn conditioning(jac: &DMatrix<f64>) -> (f64, Vec<usize>) {
    let mut scaled = jac.clone();
    for mut col in scaled.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let svd = scaled.svd(false, true);
    let s = &svd.singular_values;
    let (imax, imin) = (s.imax(), s.imin());
    let rcond = if s[imax] > 0.0 { s[imin] / s[imax] } else { 0.0 };
    let vt = svd.v_t.expect("requested V");
    let weak = vt.row(imin);
    let peak = weak.amax();
    let idx = (0..weak.len()).filter(|&i| weak[i].abs() > 0.3 * peak).collect();
    (rcond, idx)
}

pub fn levenberg_marquardt(problem: &Problem, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome> {
    let n = x0.len();
    for (name, len) in [("lower", problem.lower.len()), ("upper", problem.upper.len()), ("fixed", problem.fixed.len())] {
        if len != n {
            return Err(FitError::InvalidData(format!("{name} has {len} entries for {n} parameters")));
        }
    }
    for j in 0..n {
        let name = &problem.names[j];
        if !x0[j].is_finite() {
            return Err(FitError::InvalidParameter { name: name.clone(), reason: "initial value is not finite".into() });
        }
        if !(problem.lower[j] <= x0[j] && x0[j] <= problem.upper[j]) {
            return Err(FitError::InvalidParameter {
                name: name.clone(),
                reason: format!("initial value {} outside [{}, {}]", x0[j], problem.lower[j], problem.upper[j]),
            });
        }
    }
    let free: Vec<usize> = (0..n).filter(|&j| !problem.fixed[j]).collect();
    let mut st = State { problem, free: free.clone(), evaluations: 0 };
    let mut x = x0.to_vec();
    let mut r = st
        .residual(&x)
        .ok_or_else(|| FitError::InvalidData("model is undefined at the initial parameters".into()))?;
    let m = r.len();
    if m < free.len() + 2 {
        return Err(FitError::InvalidData(format!("{m} residuals for {} free parameters", free.len())));
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut message = String::from("maximum iterations reached");
    let mut iterations = 0;
    let mut grad_norm = f64::NAN;
    let mut jac = st.jacobian(&x, m)?;
    let (rcond, weak) = conditioning(&jac);
    if free.is_empty() {
        converged = true;
        message = "no free parameters".into();
    } else if !(rcond > opts.rcond) {
        return Err(FitError::RankDeficient {
            condition: 1.0 / rcond,
            params: weak.iter().map(|&c| problem.names[free[c]].clone()).collect(),
        });
    }

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        if iterations > 1 {
            jac = st.jacobian(&x, m)?;
        }
        let g = jac.tr_mul(&r);
        let rn = r.norm();
        // Parameters held at a bound by a gradient pointing out of the box
        // take no step and do not count towards the gradient test.
        let active: Vec<bool> = free
            .iter()
            .enumerate()
            .map(|(c, &j)| (x[j] <= problem.lower[j] && g[c] > 0.0) || (x[j] >= problem.upper[j] && g[c] < 0.0))
            .collect();
        grad_norm = (0..free.len())
            .filter(|&c| !active[c])
            .map(|c| {
                let cn = jac.column(c).norm();
                if cn * rn > 0.0 {
                    g[c].abs() / (cn * rn)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if rn == 0.0 || grad_norm < opts.gtol {
            converged = true;
            message = "gradient below tolerance".into();
            break;
        }
        let a = jac.tr_mul(&jac);
        let dmax = a.diagonal().max();
        let d: DVector<f64> = a.diagonal().map(|v| v.max(1e-15 * dmax));
        loop {
            let mut lhs = a.clone();
            let mut rhs = -&g;
            for c in 0..free.len() {
                lhs[(c, c)] += lambda * d[c];
                if active[c] {
                    lhs.row_mut(c).fill(0.0);
                    lhs.column_mut(c).fill(0.0);
                    lhs[(c, c)] = 1.0;
                    rhs[c] = 0.0;
                }
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    message = "normal equations are not positive definite".into();
                    break;
                }
                continue;
            };
            let delta = chol.solve(&rhs);
            let mut trial = x.clone();
            for (c, &j) in free.iter().enumerate() {
                trial[j] = (x[j] + delta[c]).clamp(problem.lower[j], problem.upper[j]);
            }
            let rel_step = free
                .iter()
                .map(|&j| (trial[j] - x[j]).abs() / (x[j].abs() + problem.scales[j]))
                .fold(0.0, f64::max);
            let accepted = match st.residual(&trial) {
                Some(rt) if 0.5 * rt.norm_squared() < cost => {
                    cost = 0.5 * rt.norm_squared();
                    r = rt;
                    x = trial;
                    lambda = (lambda / 3.0).max(1e-12);
                    true
                }
                _ => {
                    lambda *= 4.0;
                    false
                }
            };
            if rel_step < opts.xtol {
                converged = true;
                message = "relative step below tolerance".into();
                break;
            }
            if accepted {
                break;
            }
            if lambda > 1e20 {
                message = "damping diverged without decreasing the cost".into();
                break;
            }
        }
        if lambda > 1e20 {
            break;
        }
    }

    let jac = st.jacobian(&x, m)?;
    let dof = (m - free.len()).max(1) as f64;
    let var = r.norm_squared() / dof;
    let mut stderr = vec![0.0; n];
    if !free.is_empty() {
        if let Ok(inv) = jac.tr_mul(&jac).pseudo_inverse(1e-14) {
            for (c, &j) in free.iter().enumerate() {
                stderr[j] = (inv[(c, c)].max(0.0) * var).sqrt();
            }
        }
    }
    Ok(LmOutcome {
        x,
        stderr,
        residual_norm: r.norm(),
        gradient_norm: if grad_norm.is_nan() { 0.0 } else { grad_norm },
        converged,
        iterations,
        evaluations: st.evaluations,
        message,
    })
}
