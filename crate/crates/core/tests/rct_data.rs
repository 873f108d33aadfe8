use proptest::prelude::*;
use upflip::rct_data::{generate_synthetic, load_csv, sigmoid, summarize, write_csv, Schema, SyntheticSpec};
use upflip::Group;

fn hetero(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        p: 3,
        beta_control: vec![-2.0, 0.7, -0.3, 0.0],
        beta_uplift: vec![0.4, 0.0, 0.6, -0.5],
        treatment_share: 0.4,
        seed,
    }
}

#[test]
fn generic_csv_round_trip_is_bit_identical() {
    let (mut d, _) = hetero(3).generate(500).unwrap();
    let w: Vec<f64> = (0..d.n()).map(|i| 0.1 + (i % 7) as f64 / 3.0).collect();
    d = d.with_weights(w).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    write_csv(&d, &path).unwrap();
    let back = load_csv(&path, Schema::Generic).unwrap();
    assert_eq!(back.feature_names(), d.feature_names());
    assert_eq!(back.response(), d.response());
    assert_eq!(back.group(), d.group());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.features()), bits(d.features()));
    assert_eq!(bits(back.weights()), bits(d.weights()));
}

#[test]
fn intercept_only_rates_match_logistic_link() {
    let spec = SyntheticSpec {
        p: 0,
        beta_control: vec![-4.6],
        beta_uplift: vec![1.0],
        treatment_share: 0.5,
        seed: 77,
    };
    let (d, tau) = spec.generate(1_000_000).unwrap();
    let s = summarize(&d).unwrap();
    let (pc, pt) = (sigmoid(-4.6), sigmoid(-3.6));
    for (got, want, g) in [(s.rate_control, pc, Group::Control), (s.rate_treatment, pt, Group::Treatment)] {
        let n = d.group_weight(g);
        let se = (want * (1.0 - want) / n).sqrt();
        assert!((got - want).abs() < 4.0 * se, "{g:?}: {got} vs {want}");
    }
    assert!(tau.iter().all(|&t| (t - (pt - pc)).abs() < 1e-15));
    assert!((s.share_treatment - 0.5).abs() < 4.0 * (0.25f64 / 1e6).sqrt());
}

#[test]
fn features_are_independent_of_assignment() {
    let (d, _) = hetero(12).generate(200_000).unwrap();
    for j in 0..d.p() {
        let mean = |g: Group| {
            let idx = d.group_indices(g);
            idx.iter().map(|&i| d.row(i)[j]).sum::<f64>() / idx.len() as f64
        };
        let nt = d.group_indices(Group::Treatment).len() as f64;
        let nc = d.n() as f64 - nt;
        let se = (1.0 / nt + 1.0 / nc).sqrt();
        let diff = mean(Group::Treatment) - mean(Group::Control);
        assert!(diff.abs() < 4.0 * se, "feature {j}: {diff}");
    }
}

#[test]
fn generator_is_deterministic() {
    let a = generate_synthetic(&hetero(0), 1000, 5).unwrap();
    let b = generate_synthetic(&hetero(0), 1000, 5).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic(&hetero(0), 1000, 6).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn malformed_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x,y,w\n1.0,2,1\n").unwrap();
    assert!(load_csv(&path, Schema::Generic).is_err());
    std::fs::write(&path, "x,y\n1.0,1\n").unwrap();
    assert!(load_csv(&path, Schema::Generic).is_err());
    assert!(load_csv(dir.path().join("missing.csv"), Schema::Generic).is_err());
}

#[test]
fn sample_records_keeps_source_order() {
    let (d, _) = hetero(1).generate(300).unwrap();
    let s = d.sample_records(50, 9);
    assert_eq!(s.n(), 50);
    assert_eq!(s, d.sample_records(50, 9));
    // each sampled row is found strictly after the previous one
    let mut from = 0;
    for i in 0..s.n() {
        let at = (from..d.n()).find(|&j| d.row(j) == s.row(i)).expect("row in source order");
        assert_eq!(d.group()[at], s.group()[i]);
        from = at + 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tau_is_a_probability_difference(seed in any::<u64>(), b in prop::collection::vec(-6.0f64..6.0, 8)) {
        let spec = SyntheticSpec {
            p: 3,
            beta_control: b[..4].to_vec(),
            beta_uplift: b[4..].to_vec(),
            treatment_share: 0.5,
            seed,
        };
        let (d, tau) = spec.generate(200).unwrap();
        for (i, t) in tau.iter().enumerate() {
            let x = d.row(i);
            prop_assert!((-1.0..=1.0).contains(t));
            prop_assert!((t - (spec.prob_treatment(x) - spec.prob_control(x))).abs() == 0.0);
        }
    }
}
