use num_complex::Complex64 as C64;
use proptest::prelude::*;
use saser_fitkit::*;

/// Half-maximum crossing of a decreasing function by bisection.
fn crossing(f: impl Fn(f64) -> f64, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if f(m) > level {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn truth_init_is_a_fixed_point() {
    for m in Model::ALL {
        let case = SyntheticCase::device(m);
        let fit = fit_curve(m, &case.exact(), &case.truth, &Bounds::for_model(m)).unwrap();
        assert!(fit.converged && fit.iterations <= 2, "{m}: {} after {}", fit.message, fit.iterations);
        for (v, t) in fit.params.iter().zip(&case.truth) {
            let scale = if *t == 0.0 { case.width() } else { t.abs() };
            assert!((v - t).abs() <= 1e-8 * scale, "{m}: {v} vs {t}");
        }
        assert!(fit.stderr.iter().all(|s| *s >= 0.0));
    }
}

#[test]
fn noiseless_fits_from_a_perturbed_start_recover_the_truth() {
    for m in Model::ALL {
        let case = SyntheticCase::device(m);
        let init = case.perturbed_init(3, 0.2);
        let fit = fit_curve(m, &case.exact(), &init, &Bounds::for_model(m)).unwrap();
        assert!(fit.converged, "{m}: {}", fit.message);
        for (v, t) in fit.params.iter().zip(&case.truth) {
            let scale = if *t == 0.0 { case.width() } else { t.abs() };
            assert!((v - t).abs() <= 1e-6 * scale, "{m}: {v} vs {t}");
        }
    }
}

#[test]
fn monte_carlo_round_trips() {
    for m in Model::ALL {
        let r = round_trip(&SyntheticCase::device(m), 100, 0.3, 0.05);
        assert!(r.success_rate() >= 0.95, "{r:?}");
    }
}

#[test]
fn resonator_quality_factors_are_distinguished() {
    for q in [24e3, 34e3] {
        let mut case = SyntheticCase::device(Model::Lorentzian);
        case.truth[0] = q;
        let fit = fit_curve(Model::Lorentzian, &case.sample(5), &case.perturbed_init(5, 0.3), &Bounds::for_model(Model::Lorentzian))
            .unwrap();
        let got = fit.get("q_i").unwrap();
        assert!((got / q - 1.0).abs() < 0.03, "{got} vs {q}");
        let fwhm_khz = fit.get("f0").unwrap() / got * 1e3;
        if q == 34e3 {
            assert!((fwhm_khz - 94.4).abs() < 3.0, "{fwhm_khz}");
        }
    }
}

#[test]
fn notch_gf_pump_and_ratio_are_not_separable() {
    let case = SyntheticCase::device(Model::NotchGf);
    let opts = FitOptions { fixed: Some(vec![false; 5]), ..Default::default() };
    let err = fit_curve_with(Model::NotchGf, &case.exact(), &case.truth, &Bounds::for_model(Model::NotchGf), &opts)
        .unwrap_err();
    match err {
        FitError::RankDeficient { params, .. } => {
            assert!(params.contains(&"omega".to_string()) && params.contains(&"rate_ratio".to_string()), "{params:?}")
        }
        e => panic!("{e}"),
    }
}

#[test]
fn notch_fit_to_magnitude_only_data() {
    let case = SyntheticCase::device(Model::NotchGe);
    let exact = case.exact();
    let mag = CurveData::real(exact.x.clone(), exact.y.iter().map(|v| v.norm_sqr()).collect(), YKind::MagnitudeSquared, exact.unit)
        .unwrap();
    let fit = fit_curve(Model::NotchGe, &mag, &case.perturbed_init(1, 0.1), &Bounds::for_model(Model::NotchGe)).unwrap();
    assert!(fit.converged);
    assert!((fit.get("gamma2").unwrap() / 17.5 - 1.0).abs() < 1e-4);
}

#[test]
fn rejects_mismatched_inputs() {
    let case = SyntheticCase::device(Model::Voigt);
    let data = case.exact();
    assert!(fit_curve(Model::NotchGe, &data, &[1.0, 1.0, 0.0, 1.0], &Bounds::for_model(Model::NotchGe)).is_err());
    let mut init = case.truth.clone();
    init[1] = -1.0;
    assert!(matches!(fit_curve(Model::Voigt, &data, &init, &Bounds::for_model(Model::Voigt)), Err(FitError::InvalidParameter { .. })));
    let short = CurveData::real(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], YKind::Psd, FreqUnit::KHz).unwrap();
    assert!(matches!(fit_curve(Model::Voigt, &short, &case.truth, &Bounds::for_model(Model::Voigt)), Err(FitError::InvalidData(_))));
}

#[test]
fn max_iterations_gives_a_non_converged_result() {
    let case = SyntheticCase::device(Model::Voigt);
    let opts = FitOptions { lm: LmOptions { max_iterations: 1, ..Default::default() }, fixed: None };
    let fit =
        fit_curve_with(Model::Voigt, &case.sample(1), &case.perturbed_init(1, 0.3), &Bounds::for_model(Model::Voigt), &opts)
            .unwrap();
    assert!(!fit.converged && fit.iterations == 1 && fit.message.contains("maximum"));
}

#[test]
fn voigt_width_follows_the_olivero_approximation() {
    for &(fl, fg) in &[(1.0, 0.0), (1.0, 0.5), (1.0, 1.0), (0.5, 1.0), (0.1, 1.0), (0.0, 1.0), (3.0, 0.2)] {
        let p = Voigt { center: 0.0, lorentz_fwhm: fl, gauss_fwhm: fg, amplitude: 1.0, background: 0.0 };
        let f = |x: f64| eval_voigt(x, &p).unwrap();
        let numeric = 2.0 * crossing(f, 0.5, 0.0, 10.0 * (fl + fg));
        let approx = voigt_fwhm_approx(fl, fg);
        assert!((numeric / approx - 1.0).abs() < 3e-4, "({fl}, {fg}): {numeric} vs {approx}");
    }
}

#[test]
fn evaluators_approach_their_baseline() {
    let far = 1e7;
    let ge = eval_notch_ge(far, &NotchGe { gamma1: 35.0, gamma2: 17.5, f0: 0.0, omega: 13.0 }).unwrap();
    let gf = eval_notch_gf(-far, &NotchGf { gamma1: 6.0, gamma2: 106.0, f0: 0.0, omega: 30.0, rate_ratio: 2.9 }).unwrap();
    assert!((ge - C64::new(1.0, 0.0)).norm() < 1e-5 && (gf - C64::new(1.0, 0.0)).norm() < 1e-5);
    let r = eval_lorentzian_resonator(1e9, &Resonator { q_i: 34e3, f0: 3210.0, a: 1e-5 }).unwrap();
    assert!(r < 1e-12);
    let v = eval_voigt(far, &Voigt { center: 0.0, lorentz_fwhm: 1.0, gauss_fwhm: 1.0, amplitude: 1.0, background: 0.2 }).unwrap();
    assert!((v - 0.2).abs() < 1e-12);
}

#[test]
fn csv_round_trip_through_a_file() {
    let dir = std::env::temp_dir().join(format!("fitkit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("s21.csv");
    let case = SyntheticCase::device(Model::NotchGe);
    let data = case.exact();
    let mut text = String::from("f [MHz],re,im\n");
    for (x, y) in data.x.iter().zip(&data.y) {
        text.push_str(&format!("{x:e},{:e},{:e}\n", y.re, y.im));
    }
    std::fs::write(&path, text).unwrap();
    let read = CurveData::read_csv(&path).unwrap();
    assert_eq!(read, data);
    assert!(matches!(CurveData::read_csv(&dir.join("missing.csv")), Err(FitError::Io { .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voigt_decreases_away_from_center(fl in 0.0f64..5.0, fg in 0.01f64..5.0, c in -3.0f64..3.0, steps in 2usize..60) {
        let p = Voigt { center: c, lorentz_fwhm: fl, gauss_fwhm: fg, amplitude: 2.0, background: 0.1 };
        let h = 0.37 * (fl + fg);
        for side in [-1.0, 1.0] {
            let mut prev = eval_voigt(c, &p).unwrap();
            for k in 1..steps {
                let v = eval_voigt(c + side * h * k as f64, &p).unwrap();
                prop_assert!(v <= prev + 1e-15, "{} > {} at step {}", v, prev, k);
                prev = v;
            }
        }
    }

    #[test]
    fn fwhm_ignores_scale_and_offset(w in 0.5f64..3.0, scale in 1e-3f64..1e3, offset in -5.0f64..5.0) {
        let x: Vec<f64> = (-300..=300).map(|i| i as f64 * w / 20.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 / (1.0 + (2.0 * v / w).powi(2))).collect();
        let base = fwhm_of(&x, &y).unwrap();
        let z: Vec<f64> = y.iter().map(|v| scale * v + offset).collect();
        let moved = fwhm_of(&x, &z).unwrap();
        prop_assert!((moved / base - 1.0).abs() < 5e-3);
        prop_assert!((base / w - 1.0).abs() < 5e-3);
    }

    #[test]
    fn gaussian_fwhm(sigma in 0.2f64..2.0) {
        // At least 20 points per width.
        let h = 2.3548 * sigma / 20.0;
        let x: Vec<f64> = (-400..=400).map(|i| i as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|v| (-(v * v) / (2.0 * sigma * sigma)).exp()).collect();
        let want = 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma;
        prop_assert!((fwhm_of(&x, &y).unwrap() / want - 1.0).abs() < 5e-3);
    }
}
