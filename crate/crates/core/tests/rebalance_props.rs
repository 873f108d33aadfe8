mod common;

use proptest::prelude::*;
use rand::Rng;
use upflip::rct_data::summarize;
use upflip::rebalance::{
    classification_prob_recovery, compute_flip_factor, flip_expand_weights, flip_stochastic, log_odds_dependence,
    treatment_balance_weights, undersample_weights, undersampled_prob, FlipMode, FlipPlan,
};
use upflip::rng::seeded;
use upflip::{Group, RctDataset};

fn plan_strategy() -> impl Strategy<Value = FlipPlan> {
    (0.01f64..=1.0, 0..4u8).prop_map(|(k, which)| match which {
        0 => FlipPlan::same_majority(0, k).unwrap(),
        1 => FlipPlan::same_majority(1, k).unwrap(),
        2 => FlipPlan::mixed(1, k).unwrap(),
        _ => FlipPlan::mixed(0, k).unwrap(),
    })
}

fn dataset_strategy() -> impl Strategy<Value = RctDataset> {
    prop::collection::vec((-5.0f64..5.0, any::<bool>(), any::<bool>(), 0.0f64..3.0), 2..60).prop_map(|rows| {
        let mut rows = rows;
        rows[0].2 = true;
        rows[1].2 = false;
        rows[0].3 += 0.5;
        rows[1].3 += 0.5;
        RctDataset::new(
            vec!["x".into()],
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| u8::from(r.1)).collect(),
            rows.iter().map(|r| if r.2 { Group::Treatment } else { Group::Control }).collect(),
            Some(rows.iter().map(|r| r.3).collect()),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn flip_then_recover_returns_tau(plan in plan_strategy(), pt in 0.0f64..=1.0, pc in 0.0f64..=1.0) {
        let breve = plan.forward_tau(pt, pc);
        let back = plan.recovery().apply(breve);
        prop_assert!((back - (pt - pc)).abs() <= 1e-12, "{plan:?}: {back} vs {}", pt - pc);
    }

    #[test]
    fn flipped_rate_scales_the_flipped_class(plan in plan_strategy(), p1 in 0.0f64..=1.0) {
        for g in Group::BOTH {
            let q1 = plan.flipped_rate(g, p1);
            let (k0, k1) = (plan.factor(g, 0), plan.factor(g, 1));
            prop_assert!(((1.0 - q1) - k0 * (1.0 - p1) - (1.0 - k1) * p1).abs() < 1e-15);
            if k0 < 1.0 {
                prop_assert!(((1.0 - q1) - k0 * (1.0 - p1)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn expansion_preserves_weight(d in dataset_strategy(), plan in plan_strategy()) {
        let e = flip_expand_weights(&d, &plan);
        let (a, b) = (d.total_weight(), e.total_weight());
        prop_assert!((a - b).abs() <= 1e-12 * a);
        // pairs sum to the source weight up to one rounding
        let mut j = 0;
        for i in 0..d.n() {
            let y = d.response()[i];
            let k = plan.factor(d.group()[i], y);
            if k < 1.0 {
                let w = d.weights()[i];
                prop_assert!((e.weights()[j] + e.weights()[j + 1] - w).abs() <= 2.0 * f64::EPSILON * w);
                prop_assert_eq!(e.response()[j + 1], 1 - y);
                j += 2;
            } else {
                prop_assert_eq!(e.weights()[j], d.weights()[i]);
                j += 1;
            }
        }
        prop_assert_eq!(j, e.n());
    }

    #[test]
    fn stochastic_flip_keeps_records(d in dataset_strategy(), plan in plan_strategy(), seed in any::<u64>()) {
        let f = flip_stochastic(&d, &plan, seed);
        prop_assert_eq!(f.n(), d.n());
        prop_assert_eq!(f.weights(), d.weights());
        prop_assert_eq!(f.group(), d.group());
        // only flipped-class records may change
        for i in 0..d.n() {
            if plan.factor(d.group()[i], d.response()[i]) == 1.0 {
                prop_assert_eq!(f.response()[i], d.response()[i]);
            }
        }
    }

    #[test]
    fn undersampled_prob_is_monotone(p0 in 0.001f64..0.999, k in 0.001f64..0.999, dp in 0.0001f64..0.001, dk in 0.0001f64..0.001) {
        let base = undersampled_prob(p0, k);
        prop_assert!(undersampled_prob(p0 + dp, k) > base);
        prop_assert!(undersampled_prob(p0, k + dk) > base);
    }

    #[test]
    fn log_odds_increasing(a in 0.01f64..0.99, b in 0.01f64..0.99, k in 0.01f64..0.98) {
        prop_assume!((a - b).abs() > 1e-3);
        let l = log_odds_dependence(a, b, k).unwrap();
        prop_assert!(log_odds_dependence(a, b, k + 0.01).unwrap() > l);
    }

    #[test]
    fn balance_is_idempotent(d in dataset_strategy()) {
        let once = treatment_balance_weights(&d).unwrap().dataset;
        let share = once.group_weight(Group::Treatment) / once.total_weight();
        prop_assert!((share - 0.5).abs() <= 1e-12);
        let twice = treatment_balance_weights(&once).unwrap().dataset;
        for (a, b) in once.weights().iter().zip(twice.weights()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn undersampling_composes(d in dataset_strategy(), k1 in 0.01f64..=1.0, k2 in 0.01f64..=1.0) {
        let twice = undersample_weights(&undersample_weights(&d, k1, 0).unwrap(), k2, 0).unwrap();
        let once = undersample_weights(&d, k1 * k2, 0).unwrap();
        for (a, b) in twice.weights().iter().zip(once.weights()) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn computed_plans_validate(d in dataset_strategy()) {
        let s = summarize(&d).unwrap();
        let (plan, rec) = compute_flip_factor(&s);
        plan.validate().unwrap();
        prop_assert!(plan.k() > 0.0 && plan.k() <= 1.0);
        prop_assert_eq!(rec, plan.recovery());
        let mixed = s.majority_treatment != s.majority_control;
        prop_assert_eq!(plan.mode == FlipMode::Mixed, mixed);
    }
}

#[test]
fn flipped_count_is_binomial() {
    let n = 1_000_000;
    let d = RctDataset::new(vec![], vec![], vec![0; n], vec![Group::Control; n], None).unwrap();
    let f = flip_stochastic(&d, &FlipPlan::same_majority(0, 0.5).unwrap(), 3);
    let flipped = f.response().iter().filter(|&&y| y == 1).count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((flipped - 500_000.0).abs() <= 3.0 * sigma, "{flipped}");
}

#[test]
fn stochastic_flip_scales_class_zero_rate() {
    let n = 1_000_000;
    let mut rng = seeded(5);
    let response: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.35)).collect();
    let d = RctDataset::new(vec![], vec![], response, vec![Group::Treatment; n], None).unwrap();
    let k = 0.7;
    let before = d.response().iter().filter(|&&y| y == 0).count() as f64 / n as f64;
    let f = flip_stochastic(&d, &FlipPlan::same_majority(0, k).unwrap(), 6);
    let after = f.response().iter().filter(|&&y| y == 0).count() as f64 / n as f64;
    // conditional on the observed labels only the flip draws are random
    let sigma = (before * k * (1.0 - k) / n as f64).sqrt();
    assert!((after - k * before).abs() <= 3.0 * sigma, "{after} vs {}", k * before);
    let recovered = classification_prob_recovery(after, k);
    assert!((recovered - before).abs() <= 3.0 * sigma / k);
}

#[test]
fn criteo_like_group_shares() {
    let group: Vec<Group> = (0..100).map(|i| if i < 85 { Group::Treatment } else { Group::Control }).collect();
    let d = RctDataset::new(vec![], vec![], vec![0; 100], group, None).unwrap();
    let b = treatment_balance_weights(&d).unwrap();
    assert!((b.factor - 0.15 / 0.85).abs() < 1e-12);
    assert!((b.factor - 0.17647).abs() < 1e-5);
    assert!(b.dataset.weights()[..85].iter().all(|&w| w == b.factor));
    assert!(b.dataset.weights()[85..].iter().all(|&w| w == 1.0));
}

#[test]
fn hillstrom_like_factor() {
    let d = common::constant_trial(100_000, 100_000, 0.009, 0.009, 8);
    let s = summarize(&d).unwrap();
    let (plan, _) = compute_flip_factor(&s);
    assert_eq!(plan.mode, FlipMode::SameMajority0);
    let exact = 1.0 / (2.0 - s.rate_treatment - s.rate_control);
    assert!((plan.k() - exact).abs() < 1e-15);
    assert!((plan.k() - 1.0 / 1.982).abs() < 2e-3);
}
