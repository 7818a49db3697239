use horizon_core::analytic::{self, Quantity};
use horizon_core::exact::{ratio, Rational};
use horizon_core::exposure::{exact_measures, Schedule};
use horizon_core::montecarlo::{self, run_ensemble, EnsembleConfig, EXACT_TOLERANCE};
use horizon_core::process::{exact_moments, ProcessSpec, DEFAULT_ENUMERATION_CAP};
use proptest::prelude::*;

fn budget_weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..=20, 1..=max_len).prop_map(|raw| {
        let total: u32 = raw.iter().sum();
        raw.iter().map(|&w| w as f64 / total as f64).collect()
    })
}

fn rational_spec() -> impl Strategy<Value = ProcessSpec> {
    prop_oneof![
        (-20i32..20, 1i32..20).prop_map(|(m, s)| ProcessSpec::gaussian(m as f64 / 100.0, s as f64 / 40.0).unwrap()),
        (-5i32..5, 1i32..8, 5u32..12)
            .prop_map(|(m, s, nu)| ProcessSpec::student_t(m as f64 / 10.0, s as f64 / 4.0, nu as f64).unwrap()),
        Just(ProcessSpec::die()),
        Just(ProcessSpec::coin(-1.0, 1.0)),
    ]
}

fn exact(spec: &ProcessSpec, s: &Schedule, q: Quantity) -> Rational {
    analytic::exact::quantity(spec, s, q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn return_and_risk_per_unit_exposure_are_schedule_free(spec in rational_spec(), w in budget_weights(30)) {
        let s = Schedule::custom(&w).unwrap();
        let m = exact_moments(&spec).unwrap();
        let e = exact_measures(&s);
        prop_assert_eq!(exact(&spec, &s, Quantity::MeanU) / &e.e1, m.mu);
        prop_assert_eq!(exact(&spec, &s, Quantity::MeanV) / &e.e2, m.sigma2);
    }

    #[test]
    fn risk_return_ratio_ignores_horizon(spec in rational_spec(), t in 1usize..400) {
        let (_, _, rr2) = analytic::exact::annualized_squares(&spec, t).unwrap();
        let (_, _, rr2_one) = analytic::exact::annualized_squares(&spec, 1).unwrap();
        prop_assert_eq!(rr2, rr2_one);
    }

    #[test]
    fn lump_sum_has_least_normalized_uncertainty(spec in rational_spec(), t in 2usize..300) {
        let lump = Schedule::lump_sum(t).unwrap();
        let dca = Schedule::dca(t).unwrap();
        let ls = exact(&spec, &lump, Quantity::VarUNorm);
        prop_assert_eq!(&ls, &(exact_moments(&spec).unwrap().sigma2 / ratio(t as i64, 1)));
        prop_assert!(ls < exact(&spec, &dca, Quantity::VarUNorm));
    }

    #[test]
    fn enumeration_matches_closed_forms(w in budget_weights(3), die in any::<bool>()) {
        let spec = if die { ProcessSpec::die() } else { ProcessSpec::coin(-1.0, 2.0) };
        let s = Schedule::custom(&w).unwrap();
        for r in montecarlo::enumerate_verify(&spec, &s, DEFAULT_ENUMERATION_CAP).unwrap() {
            let diff = (r.estimate.unwrap() - r.analytic.unwrap()).abs();
            prop_assert!(diff <= EXACT_TOLERANCE, "{:?}", r);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ensembles_do_not_depend_on_workers(seed in any::<u64>(), n in 2u64..12_000, workers in 2usize..9) {
        let spec = ProcessSpec::ar1(0.01, 0.3, -0.4).unwrap();
        let s = Schedule::uniform_exposure(5).unwrap();
        let cfg = EnsembleConfig::new(n, 5, seed);
        prop_assert_eq!(
            run_ensemble(&spec, &s, &cfg.with_workers(1)).unwrap(),
            run_ensemble(&spec, &s, &cfg.with_workers(workers)).unwrap()
        );
    }
}
