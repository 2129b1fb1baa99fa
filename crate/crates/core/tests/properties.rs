use audit_core::blackbox::{baseline_audit, rs_audit, BlackboxParams};
use audit_core::env::{PartialFeedbackEnv, ReplayedPastDatabase};
use audit_core::family::{distance, ParamSet};
use audit_core::instance::{Hypothesis, LowerBoundInstance};
use audit_core::mixture::project_to_feasible;
use audit_core::sampling::sample_until_tau_successes;
use audit_core::stats::negbin_bounds;
use audit_core::RngStream;
use proptest::prelude::*;

fn small_params(tau: usize) -> BlackboxParams {
    BlackboxParams {
        tau_override: Some(tau),
        ..BlackboxParams::new(0.1, 0.1)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ledger_total_matches_counts(
        c_feat in 0.0f64..5.0,
        c_lab in 0.0f64..5.0,
        seed in any::<u64>(),
        unfair in any::<bool>(),
    ) {
        let hyp = if unfair { Hypothesis::Unfair } else { Hypothesis::Fair };
        let inst = LowerBoundInstance::new(0.1, 0.3, 0.3, hyp).unwrap();
        let clf = inst.classifier();
        let past = ReplayedPastDatabase { instance: &inst, classifier: &clf, seed: seed ^ 1, len: 50_000 };
        for rs in [false, true] {
            let mut env = PartialFeedbackEnv::new(&inst, &clf, c_feat, c_lab, RngStream::new(seed)).unwrap();
            let report = if rs {
                rs_audit(&mut env, &past, &small_params(20)).unwrap()
            } else {
                baseline_audit(&mut env, &past, &small_params(20)).unwrap()
            };
            let l = env.ledger();
            prop_assert!((l.total_cost - l.recomputed_total()).abs() <= 1e-9 * (1.0 + l.total_cost));
            prop_assert!((report.price(c_feat, c_lab) - report.cost).abs() <= 1e-9 * (1.0 + report.cost));
            prop_assert!((report.label_cost - c_lab * report.defaults as f64).abs() <= 1e-9 * (1.0 + report.cost));
            prop_assert!(report.labels_requested + report.features_requested <= report.samples_drawn);
        }
    }

    #[test]
    fn audits_are_deterministic(seed in any::<u64>()) {
        let inst = LowerBoundInstance::new(0.1, 0.3, 0.3, Hypothesis::Unfair).unwrap();
        let clf = inst.classifier();
        let past = ReplayedPastDatabase { instance: &inst, classifier: &clf, seed: seed ^ 1, len: 50_000 };
        let run = || {
            let mut env = PartialFeedbackEnv::new(&inst, &clf, 1.0, 1.0, RngStream::new(seed)).unwrap();
            rs_audit(&mut env, &past, &small_params(30)).unwrap()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn projection_is_idempotent_and_feasible(
        theta in prop::collection::vec(-20.0f64..20.0, 3),
        center in prop::collection::vec(-1.0f64..1.0, 3),
        radius in 0.5f64..5.0,
    ) {
        let set = ParamSet::cube(3, -2.0, 2.0);
        let p = project_to_feasible(&theta, &center, radius, &set).unwrap();
        prop_assert!(set.contains(&p));
        prop_assert!(distance(&p, &center) <= radius + 1e-6);
        let again = project_to_feasible(&p, &center, radius, &set).unwrap();
        prop_assert!(distance(&p, &again) <= 1e-9);
    }

    #[test]
    fn param_set_projection_is_idempotent(
        theta in prop::collection::vec(-20.0f64..20.0, 4),
        radius in 0.1f64..10.0,
    ) {
        for set in [ParamSet::ball(vec![0.5; 4], radius), ParamSet::cube(4, -radius, radius)] {
            let p = set.project(&theta);
            prop_assert!(set.contains(&p));
            prop_assert!(distance(&set.project(&p), &p) <= 1e-12 * (1.0 + radius));
        }
    }
}

#[test]
fn negbin_tail_frequency_respects_bound() {
    let mut rng = RngStream::new(2024);
    for (p, tau, eps) in [(0.1, 500, 0.2), (0.5, 2000, 0.1)] {
        let bound = negbin_bounds(tau, p, eps).unwrap();
        let trials = 500;
        let mut outside = 0;
        for _ in 0..trials {
            let draws = std::iter::repeat_with(|| rng.bernoulli(p));
            let n = sample_until_tau_successes(draws, tau).unwrap();
            outside += usize::from(!bound.contains(n as f64));
        }
        let freq = outside as f64 / trials as f64;
        assert!(freq <= bound.failure_prob + 0.02, "p={p} tau={tau} freq={freq}");
    }
}

#[test]
fn lower_bound_fair_estimate_is_close() {
    let inst = LowerBoundInstance::new(0.2, 0.3, 0.3, Hypothesis::Fair).unwrap();
    let clf = inst.classifier();
    let past = ReplayedPastDatabase { instance: &inst, classifier: &clf, seed: 9, len: 200_000 };
    let mut env = PartialFeedbackEnv::new(&inst, &clf, 0.0, 1.0, RngStream::new(3)).unwrap();
    let report = rs_audit(&mut env, &past, &small_params(2000)).unwrap();
    assert!(report.delta_hat <= 0.1, "delta_hat {}", report.delta_hat);
}
