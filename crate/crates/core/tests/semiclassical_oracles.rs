mod common;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saser_core::lindblad::{evolve_with, solve_steady, DensityMatrix, SteadySummary, SuperOperator};
use saser_core::model::{atomic_op, mode_op};
use saser_core::ode::Dopri5;
use saser_core::semiclassical::*;
use saser_core::{HilbertSpace, Level, ModelParams, OperatorMatrix};

const LEVELS: [Level; 3] = [Level::G, Level::E, Level::F];

fn trace_with(m: &nalgebra::DMatrix<C64>, op: &OperatorMatrix) -> C64 {
    op.iter().map(|(r, c, v)| v * m[(c, r)]).sum()
}

/// `d⟨σ_ij⟩/dt` and `d⟨b⟩/dt` from the full master equation, as a
/// semiclassical state.
fn quantum_derivative(l: &SuperOperator, rho: &nalgebra::DMatrix<C64>) -> SemiclassicalState {
    let s = l.space();
    let dr = l.apply(rho);
    let mut atom = nalgebra::Matrix3::zeros();
    for (i, &li) in LEVELS.iter().enumerate() {
        for (j, &lj) in LEVELS.iter().enumerate() {
            // ρ_ji = ⟨σ_ij⟩.
            atom[(j, i)] = trace_with(&dr, &atomic_op(s, li, lj));
        }
    }
    SemiclassicalState::from_atom_matrix(&atom, trace_with(&dr, &mode_op(s)))
}

fn mean_values(space: HilbertSpace, rho: &nalgebra::DMatrix<C64>) -> SemiclassicalState {
    let mut atom = nalgebra::Matrix3::zeros();
    for (i, &li) in LEVELS.iter().enumerate() {
        for (j, &lj) in LEVELS.iter().enumerate() {
            atom[(j, i)] = trace_with(rho, &atomic_op(space, li, lj));
        }
    }
    SemiclassicalState::from_atom_matrix(&atom, trace_with(rho, &mode_op(space)))
}

fn components(s: &SemiclassicalState) -> Vec<C64> {
    vec![s.s_gg.into(), s.s_ee.into(), s.s_ff.into(), s.s_ge, s.s_gf, s.s_ef, s.beta]
}

#[test]
fn rhs_equals_the_master_equation_on_product_states() {
    // On ρ_atom ⊗ |β⟩⟨β| the factorization ⟨σ b⟩ = ⟨σ⟩⟨b⟩ is exact, so the
    // mean-field derivative must equal tr(L[ρ] O) up to truncation.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cutoff = 20;
    let space = HilbertSpace::new(cutoff).unwrap();
    let p = ModelParams { omega_pump: 70.0, delta_ge: 3.0, delta_gf: -2.0, kappa: 0.8, gamma_phi_e: 1.5, gamma_phi_f: 0.5, fock_cutoff: cutoff, ..Default::default() };
    let l = SuperOperator::from_params(&p).unwrap();
    for k in 0..5 {
        let atom = common::random_atom(&mut rng);
        let beta = C64::from_polar(0.5 + 0.3 * k as f64, 0.7 * k as f64);
        let rho = DensityMatrix::product(space, &atom, &common::coherent(cutoff, beta)).unwrap();
        let state = mean_values(space, rho.matrix());
        let mf = mean_field_rhs(&state, &p).unwrap();
        let fq = quantum_derivative(&l, rho.matrix());
        let exact = components(&fq);
        let norm = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = components(&mf).iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9 * norm, "mean field off by {err:.2e} of {norm:.2e}");

        // One-sided second-order difference of a short full-quantum
        // evolution, (−3f(0) + 4f(dt) − f(2dt))/(2dt) = f'(0) + O(dt²).
        let dt = 1e-5;
        let tr = evolve_with(&rho, &l, &[0.0, dt, 2.0 * dt], &Dopri5::with_tolerances(1e-13, 1e-15)).unwrap();
        let m: Vec<Vec<C64>> = tr.states.iter().map(|r| components(&mean_values(space, r.matrix()))).collect();
        let fd: Vec<C64> = (0..exact.len()).map(|i| (-3.0 * m[0][i] + 4.0 * m[1][i] - m[2][i]) / (2.0 * dt)).collect();
        let err = fd.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-3 * norm, "finite difference off by {err:.2e} of {norm:.2e}");
    }
}

#[test]
fn decay_only_rate_equation() {
    let p = ModelParams { g: 0.0, omega_pump: 0.0, ..Default::default() };
    let s = SemiclassicalState { s_gg: 0.0, s_ee: 1.0, ..SemiclassicalState::ground(C64::new(0.0, 0.0)) };
    let d = mean_field_rhs(&s, &p).unwrap();
    assert!((d.s_ee + saser_core::units::angular(p.gamma_eg)).abs() < 1e-12);
    // No field and no coherence: no spontaneous seed.
    let q = ModelParams { omega_pump: 0.0, ..Default::default() };
    let d = mean_field_rhs(&SemiclassicalState::ground(C64::new(0.0, 0.0)), &q).unwrap();
    assert_eq!(d.beta, C64::new(0.0, 0.0));
}

#[test]
fn mean_field_tracks_the_full_quantum_photon_number() {
    for &(kappa, omega) in &[(0.5, 100.0), (0.7, 120.0)] {
        let p = ModelParams { kappa, omega_pump: omega, fock_cutoff: 50, ..Default::default() };
        let (_, rho) = solve_steady(&p).unwrap();
        let fq = SteadySummary::of(&rho).unwrap().n_mean;
        let mf = steady_at_pump(&p, omega).unwrap();
        assert!(mf.lasing && (5.0..=15.0).contains(&mf.n_pn), "{mf:?}");
        assert!((mf.n_pn / fq - 1.0).abs() < 0.2, "κ = {kappa}: mean field {} vs {fq}", mf.n_pn);
        // The closure keeps the excitation balance to within 5 %.
        let r = rate_balance_residual(&mf.state.populations(), mf.n_pn, &p);
        assert!(r.abs() < 0.05, "balance residual {r}");
    }
}

#[test]
fn below_threshold_fields_decay_from_any_seed() {
    let p = ModelParams { kappa: 0.188, ..Default::default() };
    let omega = 0.5 * lasing_threshold(&p);
    for beta in [C64::new(0.1, 0.0), C64::new(0.0, 0.5), C64::new(-1.0, 1.0)] {
        let seed = SemiclassicalState::ground(beta);
        let q = ModelParams { omega_pump: omega, ..p.clone() };
        let r = mean_field_steady_with(&q, &seed, &MeanFieldOptions::default()).unwrap();
        assert!(!r.lasing && r.n_pn < 1e-12, "{r:?}");
    }
}

#[test]
fn saturated_atom_has_equal_populations() {
    // Decoherence scaled down 30× relative to the device so that Ω and
    // g√N_pn both dominate every rate.
    let p = ModelParams {
        gamma_eg: 35.0 / 30.0,
        gamma_fg: 6.0 / 30.0,
        gamma_fe: 100.0 / 30.0,
        kappa: 0.006,
        ..Default::default()
    };
    let est = phonon_number_estimate(&p, false).unwrap();
    let omega = optimal_pump_heuristic(p.g, est);
    // Seeded near the expected field with short chunks: at this κ the
    // default 20/κ chunks make the explicit integration needlessly long.
    let q = ModelParams { omega_pump: omega, ..p.clone() };
    let opts = MeanFieldOptions { chunk_kappa_times: 1.0, ..Default::default() };
    let seed = SemiclassicalState::ground(C64::new((0.8 * est).sqrt(), 0.0));
    let r = mean_field_steady_with(&q, &seed, &opts).unwrap();
    let rates = [p.gamma_eg, p.gamma_fg, p.gamma_fe, p.kappa];
    let max_rate = rates.iter().copied().fold(0.0, f64::max);
    assert!(omega >= 30.0 * max_rate && p.g * r.n_pn.sqrt() >= 30.0 * max_rate, "{r:?}");
    let pop = r.state.populations();
    for v in [pop.g, pop.e, pop.f] {
        assert!((v - 1.0 / 3.0).abs() < 0.1, "{pop:?}");
    }
}

#[test]
fn device_scale_optimum_and_threshold() {
    let p = ModelParams { kappa: 0.094, ..Default::default() }.with_effective_kappa().unwrap();
    let opt = optimal_pump(&p).unwrap();
    assert!(opt.lasing);
    assert!((opt.omega_opt / 290.0 - 1.0).abs() < 0.2, "{}", opt.omega_opt);
    assert!((60.0..=130.0).contains(&opt.n_pn_max), "{}", opt.n_pn_max);
    assert!(opt.heuristic_deviation < 0.5);
    // Strong-coupling agreement with the Purcell-adjusted closed-form estimate.
    let eq3 = phonon_number_estimate(&ModelParams { kappa: 0.094, ..Default::default() }, true).unwrap();
    assert!((opt.n_pn_max / eq3 - 1.0).abs() < 0.35, "{} vs {eq3}", opt.n_pn_max);
    let th = lasing_threshold(&p);
    let onset = lasing_onset(&p, 0.3 * th, 3.0 * th).unwrap().unwrap();
    assert!((onset / th - 1.0).abs() < 0.25, "onset {onset} vs {th}");
    // The sweep is zero below the onset and positive above.
    for &(w, n) in &opt.sweep {
        if w < 0.95 * onset {
            assert_eq!(n, 0.0, "Ω = {w}");
        }
        if w > 1.05 * onset && w < 300.0 {
            assert!(n > 0.0, "Ω = {w}");
        }
    }
}
