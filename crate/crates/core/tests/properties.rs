use proptest::prelude::*;
use spde_ergo::ergodicity::{estimate_tv, fit_rate};
use spde_ergo::noise::{sample_sas, RandomStream, StableParams};
use spde_ergo::propagator::{phi1, ModeTransition};
use spde_ergo::solver::simulate_ensemble;
use spde_ergo::{DriftSpec, Ensemble, PathConfig, PowerLawSpec, SpectralModel};

fn ensemble(values: &[f64]) -> Ensemble {
    let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
    Ensemble::from_rows(0.0, &rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi1_is_a_decreasing_probability_weight(x in 0.0f64..50.0, dx in 1e-6f64..1.0) {
        let (a, b) = (phi1(x), phi1(x + dx));
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b <= a);
    }

    #[test]
    fn transition_parameters_are_monotone_in_the_step(
        lambda in 0.1f64..100.0,
        b in 0.0f64..3.0,
        q in 0.0f64..3.0,
        alpha in 0.3f64..1.99,
        h in 1e-4f64..2.0,
    ) {
        let short = ModeTransition::new(lambda, b, q, 1.0, alpha, h).unwrap();
        let long = ModeTransition::new(lambda, b, q, 1.0, alpha, 2.0 * h).unwrap();
        let stat = ModeTransition::new(lambda, b, q, 1.0, alpha, f64::INFINITY).unwrap();
        prop_assert!(long.decay < short.decay);
        prop_assert!(short.gauss_std <= long.gauss_std && long.gauss_std <= stat.gauss_std * (1.0 + 1e-12));
        prop_assert!(short.stable_scale <= long.stable_scale && long.stable_scale <= stat.stable_scale * (1.0 + 1e-12));
        prop_assert!(short.drift_gain <= h);
    }

    #[test]
    fn stable_draws_are_finite(alpha in 0.2f64..2.0, scale in 0.0f64..10.0, seed in any::<u64>()) {
        let p = StableParams::new(alpha, scale).unwrap();
        let mut s = RandomStream::new(seed, 0);
        for _ in 0..100 {
            prop_assert!(sample_sas(p, &mut s).is_finite());
        }
    }

    #[test]
    fn tv_is_a_symmetric_value_in_the_unit_interval(
        a in prop::collection::vec(-100.0f64..100.0, 1..200),
        b in prop::collection::vec(-100.0f64..100.0, 1..200),
        bins in 1usize..40,
    ) {
        let (ea, eb) = (ensemble(&a), ensemble(&b));
        let ab = estimate_tv(&ea, &eb, &[0], bins).unwrap().value;
        let ba = estimate_tv(&eb, &ea, &[0], bins).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(estimate_tv(&ea, &ea, &[0], bins).unwrap().value, 0.0);
    }

    #[test]
    fn rate_fit_recovers_exact_exponentials(beta in 0.01f64..5.0, c in 0.1f64..10.0) {
        let t: Vec<f64> = (0..8).map(|i| 0.25 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| c * (-beta * t).exp()).collect();
        let fit = fit_rate(&t, &v, 0.0).unwrap();
        prop_assert!((fit.beta - beta).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn power_law_admissibility_follows_the_gamma_threshold(alpha in 0.3f64..1.99, gamma in -2.0f64..2.0) {
        prop_assume!((gamma - 1.0 / alpha).abs() > 1e-9);
        let model = spde_ergo::build_model(&PowerLawSpec::heat_equation(alpha, gamma, 0.5), 4).unwrap();
        let e = model
            .report()
            .entries
            .iter()
            .find(|e| e.id.label() == "315")
            .unwrap();
        prop_assert_eq!(e.pass, gamma < 1.0 / alpha);
    }

    #[test]
    fn ensembles_are_pure_functions_of_the_seed(seed in any::<u64>(), x in -5.0f64..5.0) {
        let model = SpectralModel::from_lists(
            1.2,
            vec![1.0, 3.0],
            vec![0.5, 0.5],
            vec![0.5, 0.0],
            vec![0.0, 0.1],
            DriftSpec::saturating(0.3, 1.0, 1, 2),
        )
        .unwrap();
        let config = PathConfig::new(0.1, 0.5);
        let a = simulate_ensemble(&model, &[x, 0.0], &config, 8, seed, &[0.5]).unwrap();
        let b = simulate_ensemble(&model, &[x, 0.0], &config, 8, seed, &[0.5]).unwrap();
        prop_assert_eq!(a.snapshots[0].rows().collect::<Vec<_>>(), b.snapshots[0].rows().collect::<Vec<_>>());
    }
}
