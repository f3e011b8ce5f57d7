mod common;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use saser_core::lindblad::{
    evolve_with, expectation, solve_steady, steady_state, DensityMatrix, ProbeResponse, SteadySummary, SuperOperator,
};
use saser_core::model::{atomic_op, mode_op, number_op};
use saser_core::ode::Dopri5;
use saser_core::units::angular;
use saser_core::{Channel, ChannelKind, HilbertSpace, Level, ModelParams, OperatorMatrix};

/// Device rates with the resonator loss raised to 5 MHz and a pump above
/// threshold.
fn scaled(cutoff: usize) -> ModelParams {
    ModelParams { kappa: 5.0, omega_pump: 100.0, fock_cutoff: cutoff, ..Default::default() }
}

#[test]
fn single_mode_decay_rate() {
    let s = HilbertSpace::new(4).unwrap();
    let kappa = angular(0.7);
    let l = SuperOperator::new(OperatorMatrix::zero(s), vec![Channel::new(ChannelKind::ResonatorLoss, mode_op(s), kappa)])
        .unwrap();
    let rho = DensityMatrix::basis(s, Level::G, 1);
    let dn = l.apply(rho.matrix());
    let dn = DensityMatrix::new_unchecked(s, dn).unwrap();
    let rate = expectation(&dn, &number_op(s)).unwrap();
    assert!((rate.re + kappa).abs() < 1e-12 && rate.im.abs() < 1e-12);
    // No Hamiltonian, no channels: nothing moves.
    let idle = SuperOperator::new(OperatorMatrix::zero(s), vec![]).unwrap();
    assert!(idle.apply(DensityMatrix::maximally_mixed(s).matrix()).camax() == 0.0);
}

#[test]
fn pump_rabi_oscillation_between_g_and_f() {
    let p = ModelParams { g: 0.0, gamma_eg: 0.0, gamma_fg: 0.0, gamma_fe: 0.0, kappa: 0.0, omega_pump: 3.0, fock_cutoff: 2, ..Default::default() };
    let s = HilbertSpace::new(2).unwrap();
    let l = SuperOperator::from_params(&p).unwrap();
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.01).collect();
    let tr = evolve_with(&DensityMatrix::basis(s, Level::G, 0), &l, &times, &Dopri5::with_tolerances(1e-10, 1e-12)).unwrap();
    let om = angular(3.0);
    for (t, rho) in times.iter().zip(&tr.states) {
        let pf = expectation(rho, &atomic_op(s, Level::F, Level::F)).unwrap().re;
        assert!((pf - (0.5 * om * t).sin().powi(2)).abs() < 1e-8, "t = {t}: {pf}");
    }
}

#[test]
fn evolution_converges_to_the_steady_state() {
    let p = scaled(30);
    let (l, rho_ss) = solve_steady(&p).unwrap();
    let s = l.space();
    let times: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
    let tr = evolve_with(&DensityMatrix::basis(s, Level::G, 0), &l, &times, &Dopri5::default()).unwrap();
    let last = tr.states.last().unwrap();
    let dist = last.trace_distance(&rho_ss).unwrap();
    assert!(dist < 1e-4, "trace distance {dist:.2e}");
    assert!(tr.max_trace_drift < 1e-7, "{}", tr.max_trace_drift);
    assert!(tr.max_hermiticity_error < 1e-9, "{}", tr.max_hermiticity_error);
    assert!(tr.states.iter().all(|r| r.min_eigenvalue() > -1e-8));
}

#[test]
fn excitation_balance_is_exact() {
    let p = ModelParams { fock_cutoff: 40, ..scaled(40) };
    let (_, rho) = solve_steady(&p).unwrap();
    let sum = SteadySummary::of(&rho).unwrap();
    let gain = p.gamma_fe * sum.pop_f - p.gamma_eg * sum.pop_e;
    let loss = p.kappa * sum.n_mean;
    assert!(sum.n_mean > 0.1, "{sum:?}");
    assert!(((gain - loss) / loss).abs() < 1e-3, "gain {gain} loss {loss}");
    assert!(rho.min_eigenvalue() > -1e-8 && rho.hermiticity_error() < 1e-10);
    assert!(sum.top_fock_weight < 1e-6, "{sum:?}");
}

#[test]
fn dark_state_without_pump() {
    let p = ModelParams { omega_pump: 0.0, kappa: 1.0, fock_cutoff: 5, ..Default::default() };
    let (_, rho) = solve_steady(&p).unwrap();
    let g0 = DensityMatrix::basis(rho.space(), Level::G, 0);
    assert!(rho.trace_distance(&g0).unwrap() < 1e-10);
}

/// Integrates the master equation with the explicit probe
/// `ε(b e^{iδt} + b† e^{−iδt})` and returns `i(κ/2)⟨b⟩e^{iδt}/ε` averaged over
/// the last part of the run, together with its spread.
fn time_domain_transmission(p: &ModelParams, rho0: &DensityMatrix, detuning: f64, eps: f64) -> (C64, f64) {
    let l = SuperOperator::from_params(p).unwrap();
    let s = l.space();
    let d = s.dim();
    let b = mode_op(s);
    let bd = b.adjoint();
    let (e, w) = (angular(eps), angular(detuning));
    let times: Vec<f64> = (0..=600).map(|i| i as f64 * 0.01).collect();
    let mut samples = Vec::new();
    Dopri5::with_tolerances(1e-10, 1e-14)
        .integrate(
            |t, y, dy| {
                let rho = DMatrix::from_column_slice(d, d, y);
                let ph = C64::from_polar(1.0, w * t);
                let v_rho = (b.mul_dense(&rho) * ph + bd.mul_dense(&rho) * ph.conj()) * C64::new(0.0, e);
                let rho_v = (b.dense_mul(&rho) * ph + bd.dense_mul(&rho) * ph.conj()) * C64::new(0.0, e);
                let out = l.apply(&rho) - v_rho + rho_v;
                dy.copy_from_slice(out.as_slice());
            },
            &times,
            rho0.matrix().as_slice(),
            |i, t, y| {
                if i >= 400 {
                    let rho = DMatrix::from_column_slice(d, d, y);
                    let bm: C64 = b.iter().map(|(r, c, v)| v * rho[(c, r)]).sum();
                    samples.push(C64::new(0.0, 0.5 * angular(p.kappa)) * bm * C64::from_polar(1.0, w * t) / e);
                }
            },
        )
        .unwrap();
    let mean = samples.iter().sum::<C64>() / samples.len() as f64;
    let spread = samples.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    (mean, spread)
}

#[test]
fn rotating_frame_probe_matches_time_domain_evolution() {
    let p = ModelParams { kappa: 2.0, omega_pump: 40.0, delta_ge: 4.0, fock_cutoff: 6, ..Default::default() };
    let resp = ProbeResponse::new(&p).unwrap();
    for dp in [-9.0, 0.0, 6.0] {
        let lin = resp.transmission(dp).unwrap();
        let (td, spread) = time_domain_transmission(&p, resp.steady_state(), dp, 1e-4 * p.kappa);
        assert!(spread < 1e-4 * td.norm().max(1e-2), "δ = {dp}: unsettled, spread {spread:.2e}");
        assert!((td - lin).norm() < 1e-3 * lin.norm().max(1e-2), "δ = {dp}: {td} vs {lin}");
    }
}

#[test]
fn probe_resolves_vacuum_rabi_splitting_when_linewidths_are_narrow() {
    // Atom and resonator widths far below g: the normal modes sit at ±g.
    let p = ModelParams {
        omega_pump: 0.0,
        gamma_eg: 0.5,
        gamma_fg: 0.5,
        gamma_fe: 0.0,
        kappa: 0.5,
        fock_cutoff: 3,
        ..Default::default()
    };
    let resp = ProbeResponse::new(&p).unwrap();
    let x: Vec<f64> = (-3000..=3000).map(|i| i as f64 * 0.01).collect();
    let y: Vec<f64> = x.iter().map(|&d| resp.transmission(d).unwrap().norm()).collect();
    let mut pk = common::peaks(&x, &y);
    pk.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (lo, hi) = (pk[0].0.min(pk[1].0), pk[0].0.max(pk[1].0));
    assert!(((hi - lo) - 2.0 * p.g).abs() < 0.01 * 2.0 * p.g, "peaks at {lo}, {hi}");
}

#[test]
fn far_detuned_atom_leaves_a_unit_lorentzian() {
    let p = ModelParams { omega_pump: 0.0, delta_ge: 5000.0, kappa: 0.4, fock_cutoff: 3, ..Default::default() };
    let resp = ProbeResponse::new(&p).unwrap();
    // The detuned atom pulls the resonance down by g²/δ_ge.
    let pull = p.g * p.g / p.delta_ge;
    let t0 = resp.transmission(-pull).unwrap().norm();
    assert!((t0 - 1.0).abs() < 1e-3, "{t0}");
    // |t| falls to 1/√2 at δ = ±κ/2 from the peak: |t|² has FWHM κ.
    for s in [-1.0, 1.0] {
        let t = resp.transmission(s * 0.5 * p.kappa - pull).unwrap().norm();
        assert!((t * t - 0.5).abs() < 1e-2, "{t}");
    }
}

#[test]
fn steady_state_rejects_degenerate_generators() {
    let s = HilbertSpace::new(2).unwrap();
    let l = SuperOperator::new(OperatorMatrix::zero(s), vec![]).unwrap();
    assert!(steady_state(&l).is_err());
}
