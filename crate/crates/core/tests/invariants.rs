use burkholder::burkfun::BurkholderFamily;
use burkholder::constants::solve;
use burkholder::report::linspace;
use burkholder::sde::{path_monotonicity_check, ray_slope, simulate_pair_with_threads, Scheme, SimConfig};
use burkholder::specfun::{build_series, rk4_crosscheck, Params};
use proptest::prelude::*;

fn supercritical() -> impl Strategy<Value = Params> {
    (0.3f64..8.0, 1.2f64..6.0)
        .prop_filter("p + d > 2.05", |(p, d)| p + d > 2.05)
        .prop_map(|(p, d)| Params::new(p, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_small_on_certified_range(params in supercritical()) {
        let (series, _) = solve(params).unwrap();
        for s in linspace(-1.0 + 1e-6, series.s_max_certified(), 1001) {
            let r = series.ode_residual(s).unwrap();
            prop_assert!(r.abs() <= 1e-8, "s = {s}: {r}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences(params in supercritical(), s in -0.9f64..0.9) {
        let (series, _) = solve(params).unwrap();
        let h = 1e-6;
        for order in [1u8, 2] {
            let fd = (series.eval(s + h, order - 1).unwrap() - series.eval(s - h, order - 1).unwrap()) / (2.0 * h);
            let exact = series.eval(s, order).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "order {order}: {fd} vs {exact}");
        }
    }

    #[test]
    fn rk4_agrees_with_series(params in supercritical()) {
        let series = build_series(params, 1e-14, 0.9).unwrap();
        for s in [-0.5, 0.0, 0.5] {
            let want = series.eval(s, 0).unwrap();
            let got = rk4_crosscheck(params, s, 4000).unwrap();
            prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }

    #[test]
    fn root_sign_and_constant_pattern(params in supercritical()) {
        let (_, b) = solve(params).unwrap();
        let (z0, c) = (b.z0.unwrap(), b.c_pd.unwrap());
        prop_assert!(c >= 1.0 - 1e-12);
        if (params.p - 2.0).abs() < 1e-9 {
            prop_assert!(z0.abs() < 1e-12);
        } else if params.p < 2.0 {
            prop_assert!(z0 > 0.0);
        } else {
            prop_assert!(z0 < 0.0);
        }
    }

    /// `f_n = 0` at `p = n (n + 2d - 3) / (d - 1)`, which makes `g` a polynomial of degree `n`.
    #[test]
    fn terminating_series_are_exact(d in 1.2f64..6.0, n in 1usize..5) {
        let nf = n as f64;
        let p = nf * (nf + 2.0 * d - 3.0) / (d - 1.0);
        let series = build_series(Params::new(p, d).unwrap(), 1e-14, 0.99).unwrap();
        prop_assert_eq!(series.polynomial_degree(), Some(n));
        for s in linspace(-1.0, 0.99, 101) {
            prop_assert!(series.ode_residual(s).unwrap().abs() <= 1e-12);
        }
    }
}

fn sim_config(params: Params, a: f64, seed: u64, scheme: Scheme) -> SimConfig {
    SimConfig { params, x0: 1.0, y0: 1.0, a, dt: 1e-3, t_max: 1.0, n_paths: 64, seed, scheme }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stopped_states_are_on_the_ray(a in 0.02f64..0.3, seed in any::<u64>(), squared in any::<bool>()) {
        let family = BurkholderFamily::from_params(Params::new(1.0, 3.0).unwrap()).unwrap();
        let scheme = if squared { Scheme::EulerSquared } else { Scheme::EulerReflect };
        let res = simulate_pair_with_threads(&sim_config(*family.params(), a, seed, scheme), &family, None).unwrap();
        prop_assert!(res.max_stop_defect <= 1e-12);
        prop_assert_eq!(res.n_diverged, 0);
        prop_assert!(res.ratio.value <= ray_slope(a) + 1e-12);
    }

    #[test]
    fn reflected_sum_never_decreases(d in 1.1f64..5.0, seed in any::<u64>()) {
        let cfg = sim_config(Params::new(1.5, d).unwrap(), 0.9, seed, Scheme::EulerReflect);
        prop_assert_eq!(path_monotonicity_check(&cfg).unwrap().violations, 0);
    }

    #[test]
    fn results_ignore_thread_count(seed in any::<u64>(), threads in 2usize..6) {
        let family = BurkholderFamily::from_params(Params::new(3.0, 2.0).unwrap()).unwrap();
        let cfg = sim_config(*family.params(), 0.5, seed, Scheme::EulerReflect);
        let one = simulate_pair_with_threads(&cfg, &family, Some(1)).unwrap();
        let many = simulate_pair_with_threads(&cfg, &family, Some(threads)).unwrap();
        prop_assert_eq!(one.to_json(), many.to_json());
    }
}
