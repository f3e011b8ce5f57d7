//! Mean-field (first-order factorized) dynamics.
//!
//! Taking `d⟨O⟩/dt = tr(L[ρ] O)` for the atomic projectors and `b`, and
//! replacing `⟨σ_ij b⟩ → ⟨σ_ij⟩⟨b⟩`, the atom evolves under its own Lindblad
//! equation with the effective Hamiltonian
//!
//! ```text
//! h(β) = δ_ge σ_ee + δ_gf σ_ff + (Ω/2)(σ_gf + σ_fg) + g (β σ_eg + β* σ_ge)
//! ```
//!
//! and the dissipators of Γ_eg, Γ_fg, Γ_fe and pure dephasing, while
//!
//! ```text
//! dβ/dt = −i g s_ge − (κ/2) β
//! ```
//!
//! Written out for `s_ij = ⟨σ_ij⟩` (angular units, Γ_φ the dephasing rates):
//!
//! ```text
//! ds_gg/dt = Γ_eg s_ee + Γ_fg s_ff − i g (β* s_ge − β s_ge*) − i(Ω/2)(s_gf − s_gf*)
//! ds_ee/dt = Γ_fe s_ff − Γ_eg s_ee + i g (β* s_ge − β s_ge*)
//! ds_ff/dt = −(Γ_fe + Γ_fg) s_ff + i(Ω/2)(s_gf − s_gf*)
//! ds_ge/dt = −(i δ_ge + Γ_eg/2 + Γ_φe) s_ge + i g β (s_ee − s_gg) + i(Ω/2) s_ef*
//! ds_gf/dt = −(i δ_gf + (Γ_fe + Γ_fg)/2 + Γ_φf) s_gf + i(Ω/2)(s_ff − s_gg) + i g β s_ef
//! ds_ef/dt = −(i(δ_gf − δ_ge) + (Γ_fe + Γ_fg + Γ_eg)/2 + Γ_φe + Γ_φf) s_ef − i(Ω/2) s_ge* + i g β* s_gf
//! dβ/dt    = −i g s_ge − (κ/2) β
//! ```
//!
//! These follow from the matrix form implemented below; the unit tests check
//! them against it. With the e↔f extension enabled the dispersive shift and
//! the Purcell channel factorize the same way, adding an intensity-dependent
//! dephasing `κ_P |β|² D[σ_ee]`, energy shifts `χ(|β|² + 1)` on f and
//! `−χ|β|²` on e, and `−iχ(s_ff − s_ee)β − (κ_P/2) s_ee β` to `dβ/dt`.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::params::ModelParams;
use crate::semiclassical::estimates::purcell_kappa;
use crate::semiclassical::state::SemiclassicalState;
use crate::units::{angular, from_angular};

/// Model coefficients in angular units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanField {
    de: f64,
    df: f64,
    half_pump: f64,
    g: f64,
    gamma_eg: f64,
    gamma_fg: f64,
    gamma_fe: f64,
    deph_e: f64,
    deph_f: f64,
    kappa: f64,
    kappa_p: f64,
    chi: f64,
}

const G: usize = 0;
const E: usize = 1;
const F: usize = 2;

fn unit(i: usize, j: usize) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// `γ (c ρ c† − ½{c†c, ρ})` for `c = |to⟩⟨from|`.
fn dissipate(rho: &Matrix3<C64>, to: usize, from: usize, rate: f64, out: &mut Matrix3<C64>) {
    if rate == 0.0 {
        return;
    }
    let c = unit(to, from);
    let cd = c.adjoint();
    let cdc = cd * c;
    *out += (c * rho * cd - (cdc * rho + rho * cdc) * C64::new(0.5, 0.0)) * C64::new(rate, 0.0);
}

impl MeanField {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let (kappa_p, chi) = match p.g_fe {
            Some(g_fe) if g_fe != 0.0 => {
                if p.delta_anharm == 0.0 {
                    return Err(Error::DegenerateDetuning);
                }
                (angular(purcell_kappa(p)?), angular(g_fe * g_fe / p.delta_anharm))
            }
            _ => (0.0, 0.0),
        };
        Ok(Self {
            de: angular(p.delta_ge),
            df: angular(p.delta_gf),
            half_pump: angular(p.omega_pump) / 2.0,
            g: angular(p.g),
            gamma_eg: angular(p.gamma_eg),
            gamma_fg: angular(p.gamma_fg),
            gamma_fe: angular(p.gamma_fe),
            deph_e: 2.0 * angular(p.gamma_phi_e),
            deph_f: 2.0 * angular(p.gamma_phi_f),
            kappa: angular(p.kappa),
            kappa_p,
            chi,
        })
    }

    /// Largest rate or coupling, used to scale residuals.
    pub fn rate_scale(&self) -> f64 {
        [self.de.abs(), self.df.abs(), 2.0 * self.half_pump, self.g, self.gamma_eg, self.gamma_fg, self.gamma_fe, self.kappa]
            .into_iter()
            .fold(1e-12, f64::max)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Effective atomic Hamiltonian `h(β)`.
    pub fn atom_hamiltonian(&self, beta: C64) -> Matrix3<C64> {
        let r = |x: f64| C64::new(x, 0.0);
        let n = beta.norm_sqr();
        let mut h = Matrix3::zeros();
        h[(E, E)] = r(self.de - self.chi * n);
        h[(F, F)] = r(self.df + self.chi * (n + 1.0));
        h[(G, F)] = r(self.half_pump);
        h[(F, G)] = r(self.half_pump);
        h[(E, G)] = beta * self.g;
        h[(G, E)] = beta.conj() * self.g;
        h
    }

    /// `dρ/dt` and `dβ/dt` for the atomic matrix `ρ` (which need not be
    /// Hermitian; the map is linear in `ρ` for fixed `β`).
    pub fn derivative(&self, rho: &Matrix3<C64>, beta: C64) -> (Matrix3<C64>, C64) {
        let h = self.atom_hamiltonian(beta);
        let mut d = (h * rho - rho * h) * C64::new(0.0, -1.0);
        dissipate(rho, G, E, self.gamma_eg, &mut d);
        dissipate(rho, G, F, self.gamma_fg, &mut d);
        dissipate(rho, E, F, self.gamma_fe, &mut d);
        dissipate(rho, E, E, self.deph_e + self.kappa_p * beta.norm_sqr(), &mut d);
        dissipate(rho, F, F, self.deph_f, &mut d);
        let s_ge = rho[(E, G)];
        let (s_ee, s_ff) = (rho[(E, E)], rho[(F, F)]);
        let dbeta = C64::new(0.0, -self.g) * s_ge - beta * (0.5 * self.kappa)
            - C64::new(0.0, self.chi) * (s_ff - s_ee) * beta
            - s_ee * beta * (0.5 * self.kappa_p);
        (d, dbeta)
    }

    pub fn rhs(&self, s: &SemiclassicalState) -> SemiclassicalState {
        let (d, db) = self.derivative(&s.atom_matrix(), s.beta);
        SemiclassicalState::from_atom_matrix(&d, db)
    }

    pub(crate) fn rhs_slice(&self, y: &[C64], dy: &mut [C64]) {
        let rho = Matrix3::from_column_slice(&y[..9]);
        let (d, db) = self.derivative(&rho, y[9]);
        dy[..9].copy_from_slice(d.as_slice());
        dy[9] = db;
    }

    /// Atomic steady state with `β = 0` (the non-lasing fixed point).
    pub fn non_lasing_state(&self) -> Result<SemiclassicalState> {
        let zero = C64::new(0.0, 0.0);
        let mut a = DMatrix::<C64>::zeros(9, 9);
        for j in 0..9 {
            let mut e = Matrix3::zeros();
            e[j] = C64::new(1.0, 0.0);
            let (d, _) = self.derivative(&e, zero);
            a.set_column(j, &DVector::from_column_slice(d.as_slice()));
        }
        // Replace the ρ_gg equation by the trace condition.
        let scale = a.camax().max(1e-300);
        let mut b = DVector::zeros(9);
        for j in 0..9 {
            a[(0, j)] = C64::new(0.0, 0.0);
        }
        for k in [0, 4, 8] {
            a[(0, k)] = C64::new(scale, 0.0);
        }
        b[0] = C64::new(scale, 0.0);
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::DegenerateSteadyState("atomic steady state is not unique".into()))?;
        let m = Matrix3::from_column_slice(x.as_slice());
        let m = (m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(SemiclassicalState::from_atom_matrix(&m, zero))
    }

    /// Largest real part (angular units) of the linearization around the
    /// non-lasing state `s0` in the charge-lowering variables
    /// `(β, s_ge, s_fe)`. Positive means lasing.
    pub fn growth_rate(&self, s0: &SemiclassicalState) -> f64 {
        let base = s0.atom_matrix();
        let h = 1e-6;
        let apply = |x: [C64; 3]| -> [C64; 3] {
            let mut rho = base;
            rho[(E, G)] += x[1];
            rho[(G, E)] += x[1].conj();
            rho[(E, F)] += x[2];
            rho[(F, E)] += x[2].conj();
            let (d, db) = self.derivative(&rho, s0.beta + x[0]);
            [db, d[(E, G)], d[(E, F)]]
        };
        let mut jac = nalgebra::Matrix3::<C64>::zeros();
        for j in 0..3 {
            let mut xp = [C64::new(0.0, 0.0); 3];
            let mut xm = xp;
            xp[j] = C64::new(h, 0.0);
            xm[j] = C64::new(-h, 0.0);
            let (fp, fm) = (apply(xp), apply(xm));
            for i in 0..3 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        match jac.schur().eigenvalues() {
            Some(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
            None => f64::NAN,
        }
    }
}

/// Derivative of the factorized equations.
pub fn mean_field_rhs(s: &SemiclassicalState, p: &ModelParams) -> Result<SemiclassicalState> {
    Ok(MeanField::new(p)?.rhs(s))
}

/// Integrates from `s0` and returns the state at each time of `t_grid` (µs).
pub fn integrate_mean_field(p: &ModelParams, s0: &SemiclassicalState, t_grid: &[f64]) -> Result<Vec<SemiclassicalState>> {
    let mf = MeanField::new(p)?;
    let mut out = Vec::with_capacity(t_grid.len());
    Dopri5::with_tolerances(1e-9, 1e-12).integrate(
        |_, y, dy| mf.rhs_slice(y, dy),
        t_grid,
        &s0.to_vec(),
        |_, _, y| out.push(SemiclassicalState::from_slice(y)),
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldOptions {
    /// Length of each integration chunk in units of `1/κ`.
    pub chunk_kappa_times: f64,
    /// Give up after this many units of `1/κ`.
    pub horizon_kappa_times: f64,
    /// Newton stops when the scaled residual falls below this.
    pub residual_tol: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self { chunk_kappa_times: 20.0, horizon_kappa_times: 5000.0, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldSteady {
    /// Steady state in the frame co-rotating at the lasing frequency, gauge
    /// fixed to real positive β.
    pub state: SemiclassicalState,
    pub n_pn: f64,
    pub lasing: bool,
    /// Offset of the oscillation from the resonator frame (MHz).
    pub lasing_frequency: f64,
    /// Growth rate of small fields around the non-lasing state (MHz, /2π).
    pub growth_rate: f64,
    /// Scaled residual of the stationarity conditions.
    pub residual: f64,
    /// Integrated time before the Newton polish (µs).
    pub integrated_time: f64,
}

/// Steady state of the factorized equations; `N_pn = |β|²`.
pub fn mean_field_steady(p: &ModelParams, seed: &SemiclassicalState) -> Result<SemiclassicalState> {
    Ok(mean_field_steady_with(p, seed, &MeanFieldOptions::default())?.state)
}

pub fn mean_field_steady_with(p: &ModelParams, seed: &SemiclassicalState, opts: &MeanFieldOptions) -> Result<MeanFieldSteady> {
    if !(seed.beta.norm() > 0.0) {
        return Err(Error::InvalidState("seed must have |beta| > 0 to break the phase symmetry".into()));
    }
    let mf = MeanField::new(p)?;
    if !(mf.kappa > 0.0) {
        return Err(Error::InvalidParameter { name: "kappa".into(), reason: "mean-field steady state needs kappa > 0".into() });
    }
    let s0 = mf.non_lasing_state()?;
    let growth = mf.growth_rate(&s0);
    let scale = mf.rate_scale();
    if !(growth > 1e-9 * scale) {
        let residual = scaled_norm(&mf.rhs(&s0), scale);
        return Ok(MeanFieldSteady {
            state: s0,
            n_pn: 0.0,
            lasing: false,
            lasing_frequency: 0.0,
            growth_rate: from_angular(growth),
            residual,
            integrated_time: 0.0,
        });
    }
    let chunk = opts.chunk_kappa_times / mf.kappa;
    let horizon = opts.horizon_kappa_times / mf.kappa;
    let integrator = Dopri5::with_tolerances(1e-9, 1e-12);
    let mut y = seed.to_vec().to_vec();
    let mut t = 0.0;
    let mut prev_n = seed.n_pn();
    let mut last_residual = f64::NAN;
    while t < horizon {
        let mut next = y.clone();
        integrator.integrate(|_, y, dy| mf.rhs_slice(y, dy), &[t, t + chunk], &y, |i, _, yy| {
            if i == 1 {
                next.copy_from_slice(yy);
            }
        })?;
        y = next;
        t += chunk;
        let s = SemiclassicalState::from_slice(&y);
        let n = s.n_pn();
        let settled = (n - prev_n).abs() <= 0.05 * n.max(1e-300);
        prev_n = n;
        if !settled || n < 1e-12 {
            continue;
        }
        match newton(&mf, &s, opts.residual_tol) {
            Ok((sol, omega, residual)) => {
                let close = (sol.n_pn() - n).abs() <= 0.05 * n;
                last_residual = residual;
                if close && sol.n_pn() > 1e-12 {
                    return Ok(MeanFieldSteady {
                        n_pn: sol.n_pn(),
                        state: sol,
                        lasing: true,
                        lasing_frequency: from_angular(omega),
                        growth_rate: from_angular(growth),
                        residual,
                        integrated_time: t,
                    });
                }
            }
            Err(Error::NonConvergence(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::NonConvergence(format!(
        "mean-field state did not settle within {horizon:.1} us; |beta|^2 = {prev_n:.4}, last Newton residual {last_residual:.2e}"
    )))
}

fn scaled_norm(s: &SemiclassicalState, scale: f64) -> f64 {
    s.to_vec().iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Real unknowns: ρ_gg, ρ_ee, ρ_ff, Re/Im of s_ge, s_gf, s_ef, Re/Im β, ω_L.
fn pack(s: &SemiclassicalState, omega: f64) -> [f64; 12] {
    [
        s.s_gg, s.s_ee, s.s_ff, s.s_ge.re, s.s_ge.im, s.s_gf.re, s.s_gf.im, s.s_ef.re, s.s_ef.im, s.beta.re, s.beta.im,
        omega,
    ]
}

fn unpack(x: &[f64; 12]) -> (SemiclassicalState, f64) {
    let c = |a: f64, b: f64| C64::new(a, b);
    (
        SemiclassicalState {
            s_gg: x[0],
            s_ee: x[1],
            s_ff: x[2],
            s_ge: c(x[3], x[4]),
            s_gf: c(x[5], x[6]),
            s_ef: c(x[7], x[8]),
            beta: c(x[9], x[10]),
        },
        x[11],
    )
}

/// Stationarity in the frame rotating at ω: charge-lowering quantities
/// (`β`, `s_ge`) gain `+iω`, the raising one (`s_ef`) gains `−iω`. The
/// `ρ_ff` equation is replaced by the trace and `Im β = 0` fixes the gauge.
fn residual(mf: &MeanField, x: &[f64; 12]) -> [f64; 12] {
    let (s, w) = unpack(x);
    let d = mf.rhs(&s);
    let iw = C64::new(0.0, w);
    let ge = d.s_ge + iw * s.s_ge;
    let ef = d.s_ef - iw * s.s_ef;
    let beta = d.beta + iw * s.beta;
    let sc = 1.0 / mf.rate_scale();
    [
        d.s_gg * sc,
        d.s_ee * sc,
        s.s_gg + s.s_ee + s.s_ff - 1.0,
        ge.re * sc,
        ge.im * sc,
        d.s_gf.re * sc,
        d.s_gf.im * sc,
        ef.re * sc,
        ef.im * sc,
        beta.re * sc,
        beta.im * sc,
        s.beta.im,
    ]
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Damped Newton with a central-difference Jacobian.
fn newton(mf: &MeanField, start: &SemiclassicalState, tol: f64) -> Result<(SemiclassicalState, f64, f64)> {
    // Gauge-fix to real positive β and estimate ω from dβ/dt = −iωβ.
    let s = start.rotated(-start.beta.arg());
    let d = mf.rhs(&s);
    let omega = -(d.beta / s.beta).im;
    let mut x = pack(&s, omega);
    let mut f = residual(mf, &x);
    let mut norm = inf_norm(&f);
    let wscale = mf.rate_scale();
    for _ in 0..60 {
        if norm < tol {
            return Ok((unpack(&x).0, x[11], norm));
        }
        let mut jac = nalgebra::SMatrix::<f64, 12, 12>::zeros();
        for j in 0..12 {
            let h = if j == 11 { 1e-7 * wscale } else { 1e-7 * x[j].abs().max(1.0) };
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (residual(mf, &xp), residual(mf, &xm));
            for i in 0..12 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::SVector::<f64, 12>::from_column_slice(&f);
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::NonConvergence("singular Newton Jacobian".into()));
        };
        let mut lambda = 1.0;
        loop {
            let mut trial = x;
            for i in 0..12 {
                trial[i] -= lambda * step[i];
            }
            let ft = residual(mf, &trial);
            let nt = inf_norm(&ft);
            if nt < norm || lambda < 1e-4 {
                x = trial;
                f = ft;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm < tol {
        Ok((unpack(&x).0, x[11], norm))
    } else {
        Err(Error::NonConvergence(format!("Newton residual {norm:.2e}")))
    }
}
