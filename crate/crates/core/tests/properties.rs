mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saser_core::lindblad::{steady_state, SuperOperator};
use saser_core::semiclassical::{mean_field_rhs, SemiclassicalState};
use saser_core::{build_hamiltonian, HilbertSpace, ModelParams};

fn params() -> impl Strategy<Value = ModelParams> {
    (
        (-50.0f64..50.0, -50.0f64..50.0, 0.0f64..30.0, 0.0f64..300.0),
        (0.1f64..100.0, 0.1f64..20.0, 0.1f64..300.0, 0.0f64..5.0, 0.0f64..5.0),
        (0.05f64..10.0, prop::option::of((0.1f64..30.0, 50.0f64..500.0))),
    )
        .prop_map(|((dge, dgf, g, om), (geg, gfg, gfe, pe, pf), (kappa, gfe_ext))| ModelParams {
            delta_ge: dge,
            delta_gf: dgf,
            g,
            omega_pump: om,
            gamma_eg: geg,
            gamma_fg: gfg,
            gamma_fe: gfe,
            gamma_phi_e: pe,
            gamma_phi_f: pf,
            kappa,
            g_fe: gfe_ext.map(|(x, _)| x),
            delta_anharm: gfe_ext.map(|(_, d)| d).unwrap_or(1000.0),
            fock_cutoff: 4,
            ..Default::default()
        })
}

fn random_state(seed: u64) -> SemiclassicalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atom = common::random_atom(&mut rng);
    let beta = C64::new(rand::Rng::random_range(&mut rng, -3.0..3.0), rand::Rng::random_range(&mut rng, -3.0..3.0));
    SemiclassicalState::from_atom_matrix(&atom, beta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity(p in params(), seed in any::<u64>()) {
        let l = SuperOperator::from_params(&p).unwrap();
        let rho = common::random_density(l.space(), &mut ChaCha8Rng::seed_from_u64(seed));
        let d = l.apply(rho.matrix());
        let scale = l.spectral_bound();
        prop_assert!(d.trace().norm() < 1e-10 * scale, "tr L[ρ] = {}", d.trace());
        prop_assert!((&d - d.adjoint()).camax() < 1e-10 * scale);
    }

    #[test]
    fn hamiltonian_is_hermitian(p in params()) {
        let h = build_hamiltonian(&p, HilbertSpace::new(p.fock_cutoff).unwrap()).unwrap();
        prop_assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn steady_states_are_physical(p in params()) {
        let l = SuperOperator::from_params(&p).unwrap();
        let rho = steady_state(&l).unwrap();
        prop_assert!(rho.hermiticity_error() < 1e-10);
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-9);
        prop_assert!(rho.min_eigenvalue() > -1e-8);
        prop_assert!(l.apply(rho.matrix()).camax() < 1e-9 * l.spectral_bound());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_field_conserves_population(p in params(), seed in any::<u64>()) {
        let d = mean_field_rhs(&random_state(seed), &p).unwrap();
        let scale = d.s_gg.abs() + d.s_ee.abs() + d.s_ff.abs();
        prop_assert!((d.s_gg + d.s_ee + d.s_ff).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn mean_field_is_phase_equivariant(p in params(), seed in any::<u64>(), phis in prop::collection::vec(-3.2f64..3.2, 8)) {
        let s = random_state(seed);
        let d = mean_field_rhs(&s, &p).unwrap();
        let scale = d.distance(&SemiclassicalState { s_gg: 0.0, s_ee: 0.0, s_ff: 0.0, s_ge: C64::new(0.0, 0.0), s_gf: C64::new(0.0, 0.0), s_ef: C64::new(0.0, 0.0), beta: C64::new(0.0, 0.0) });
        for phi in phis {
            let rotated = mean_field_rhs(&s.rotated(phi), &p).unwrap();
            prop_assert!(rotated.distance(&d.rotated(phi)) <= 1e-12 * scale.max(1.0), "φ = {}", phi);
        }
    }
}
