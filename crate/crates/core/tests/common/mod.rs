#![allow(dead_code)]

use rand::Rng;
use upflip::rng::seeded;
use upflip::{Group, RctDataset};

/// Trial with one constant feature and exact arm sizes; responses drawn
/// independently per arm.
pub fn constant_trial(n_t: usize, n_c: usize, rate_t: f64, rate_c: f64, seed: u64) -> RctDataset {
    let mut rng = seeded(seed);
    let mut response = Vec::with_capacity(n_t + n_c);
    let mut group = Vec::with_capacity(n_t + n_c);
    for (n, rate, g) in [(n_t, rate_t, Group::Treatment), (n_c, rate_c, Group::Control)] {
        for _ in 0..n {
            response.push(u8::from(rng.random::<f64>() < rate));
            group.push(g);
        }
    }
    let n = response.len();
    RctDataset::new(vec!["c".into()], vec![1.0; n], response, group, None).unwrap()
}

/// Standard error of a difference of two independent binomial proportions.
pub fn diff_sigma(rate_t: f64, n_t: usize, rate_c: f64, n_c: usize) -> f64 {
    (rate_t * (1.0 - rate_t) / n_t as f64 + rate_c * (1.0 - rate_c) / n_c as f64).sqrt()
}

/// Weighted rate of `y == 1` inside `group`.
pub fn group_rate(d: &RctDataset, g: Group) -> f64 {
    let (mut w, mut w1) = (0.0, 0.0);
    for i in 0..d.n() {
        if d.group()[i] == g {
            w += d.weights()[i];
            if d.response()[i] == 1 {
                w1 += d.weights()[i];
            }
        }
    }
    w1 / w
}
