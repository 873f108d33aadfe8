//! Synthetic generators with known ground truth.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, Group, LabeledData, RctDataset};
use crate::rng;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic-link trial: `P(Y=1|x,C) = σ(β_c·x̃)`, `P(Y=1|x,T) = σ((β_c+β_u)·x̃)`
/// where `x̃ = (1, x)` and `x ~ N(0, I_p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub p: usize,
    /// Intercept first, then one coefficient per feature.
    pub beta_control: Vec<f64>,
    /// Offset added to the control coefficients in the treatment arm.
    pub beta_uplift: Vec<f64>,
    pub treatment_share: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Intercept-only spec with the given arm probabilities.
    pub fn constant(rate_treatment: f64, rate_control: f64, treatment_share: f64, seed: u64) -> Self {
        let logit = |q: f64| (q / (1.0 - q)).ln();
        SyntheticSpec {
            p: 0,
            beta_control: vec![logit(rate_control)],
            beta_uplift: vec![logit(rate_treatment) - logit(rate_control)],
            treatment_share,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for (name, b) in [("beta_control", &self.beta_control), ("beta_uplift", &self.beta_uplift)] {
            if b.len() != self.p + 1 {
                return Err(DataError::InvalidSpec(format!(
                    "{name} needs {} coefficients (intercept + {} features), got {}",
                    self.p + 1,
                    self.p,
                    b.len()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidSpec(format!("{name} has non-finite entries")));
            }
        }
        if !(self.treatment_share > 0.0 && self.treatment_share < 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "treatment share must lie in (0, 1), got {}",
                self.treatment_share
            )));
        }
        Ok(())
    }

    fn linear(beta: &[f64], x: &[f64]) -> f64 {
        beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn prob_control(&self, x: &[f64]) -> f64 {
        sigmoid(Self::linear(&self.beta_control, x))
    }

    pub fn prob_treatment(&self, x: &[f64]) -> f64 {
        sigmoid(Self::linear(&self.beta_control, x) + Self::linear(&self.beta_uplift, x))
    }

    /// True uplift τ(x).
    pub fn tau(&self, x: &[f64]) -> f64 {
        self.prob_treatment(x) - self.prob_control(x)
    }

    /// Generates `n` records with this spec's own seed.
    pub fn generate(&self, n: usize) -> Result<(RctDataset, Vec<f64>), DataError> {
        generate_synthetic(self, n, self.seed)
    }
}

/// Draws `n` records and the aligned true uplift. Deterministic in `seed`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    n: usize,
    seed: u64,
) -> Result<(RctDataset, Vec<f64>), DataError> {
    spec.validate()?;
    if n == 0 {
        return Err(DataError::Empty);
    }
    let mut rng = rng::seeded(seed);
    let p = spec.p;
    let mut features = Vec::with_capacity(n * p);
    let mut response = Vec::with_capacity(n);
    let mut group = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        features.extend((0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &features[start..];
        let u_group: f64 = rng.random();
        let u_response: f64 = rng.random();
        let pc = spec.prob_control(x);
        let pt = spec.prob_treatment(x);
        let g = if u_group < spec.treatment_share {
            Group::Treatment
        } else {
            Group::Control
        };
        let q = if g.is_treatment() { pt } else { pc };
        response.push(u8::from(u_response < q));
        group.push(g);
        tau.push(pt - pc);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let data = LabeledData::from_parts(names, features, response, vec![1.0; n]);
    Ok((RctDataset::from_parts(data, group), tau))
}

/// Imbalanced binary classification problem with Gaussian clusters placed on
/// hypercube vertices in an informative subspace, linear redundant features
/// and pure-noise features (the classic "make_classification" design).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSpec {
    pub n: usize,
    /// Exact number of class-1 records before label noise.
    pub n_minority: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub clusters_per_class: usize,
    /// Half side length of the hypercube carrying the cluster centroids.
    pub class_sep: f64,
    /// Fraction of labels reassigned uniformly at random.
    pub flip_y: f64,
    pub seed: u64,
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        ClassificationSpec {
            n: 1000,
            n_minority: 20,
            n_features: 20,
            n_informative: 2,
            n_redundant: 2,
            clusters_per_class: 2,
            class_sep: 1.0,
            flip_y: 0.01,
            seed: 0,
        }
    }
}

pub fn generate_classification(spec: &ClassificationSpec) -> Result<LabeledData, DataError> {
    let ClassificationSpec {
        n,
        n_minority,
        n_features,
        n_informative,
        n_redundant,
        clusters_per_class,
        class_sep,
        flip_y,
        seed,
    } = *spec;
    if n == 0 || n_minority == 0 || n_minority >= n {
        return Err(DataError::InvalidSpec(format!(
            "need 0 < n_minority < n, got {n_minority} of {n}"
        )));
    }
    if n_informative == 0 || n_informative > 30 || n_informative + n_redundant > n_features {
        return Err(DataError::InvalidSpec("inconsistent feature counts".into()));
    }
    let n_clusters = 2 * clusters_per_class.max(1);
    if n_clusters > 1usize << n_informative {
        return Err(DataError::InvalidSpec(
            "too many clusters for the informative subspace".into(),
        ));
    }
    if !(0.0..=1.0).contains(&flip_y) {
        return Err(DataError::InvalidSpec(format!("flip_y must lie in [0, 1], got {flip_y}")));
    }
    let mut rng = rng::seeded(seed);

    let mut vertices: Vec<u64> = (0..(1u64 << n_informative)).collect();
    vertices.shuffle(&mut rng);
    let centroids: Vec<Vec<f64>> = vertices[..n_clusters]
        .iter()
        .map(|&v| {
            (0..n_informative)
                .map(|b| if v >> b & 1 == 1 { class_sep } else { -class_sep })
                .collect()
        })
        .collect();
    let mixing: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| {
            (0..n_informative * n_informative)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let redundant: Vec<f64> = (0..n_informative * n_redundant)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    // class 1 clusters are the second half of the centroid list
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_minority)).collect();
    let mut rows = Vec::with_capacity(n * n_features);
    for (i, &y) in labels.iter().enumerate() {
        let within = if y == 1 { i } else { i - n_minority };
        let c = usize::from(y) * clusters_per_class.max(1) + within % clusters_per_class.max(1);
        let z: Vec<f64> = (0..n_informative)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let informative: Vec<f64> = (0..n_informative)
            .map(|r| {
                centroids[c][r]
                    + (0..n_informative)
                        .map(|k| z[k] * mixing[c][k * n_informative + r])
                        .sum::<f64>()
            })
            .collect();
        rows.extend_from_slice(&informative);
        for j in 0..n_redundant {
            rows.push(
                (0..n_informative)
                    .map(|k| informative[k] * redundant[k * n_redundant + j])
                    .sum(),
            );
        }
        for _ in n_informative + n_redundant..n_features {
            rows.push(rng.sample::<f64, _>(StandardNormal));
        }
    }
    for y in labels.iter_mut() {
        if rng.random::<f64>() < flip_y {
            *y = u8::from(rng.random::<bool>());
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let names: Vec<String> = (0..n_features).map(|j| format!("x{j}")).collect();
    let data = LabeledData::from_parts(names, rows, labels, vec![1.0; n]);
    Ok(data.select(&order))
}
