//! Distribution-modifying transforms: class flipping (deterministic-weight
//! and stochastic forms), undersampling weights, treatment-group balancing,
//! flip-factor selection, uplift recovery and the mixed-majority log-odds
//! dependence diagnostic.
//!
//! Flipping class `c` with factor `k` keeps a record's label with
//! probability `k` and reverses it otherwise, so `P(Y̆=c|x) = k·P(Y=c|x)`
//! for every `x`. Within a group at most one class is flipped.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rct_data::{DataError, DatasetSummary, Group, LabeledData, RctDataset};
use crate::rng;

#[derive(Debug, Error)]
pub enum RebalanceError {
    #[error("factor must lie in (0, 1], got {0}")]
    InvalidFactor(f64),
    #[error("invalid flip plan: {0}")]
    InvalidPlan(String),
    #[error("argument outside the open domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn check_factor(k: f64) -> Result<(), RebalanceError> {
    if k > 0.0 && k <= 1.0 {
        Ok(())
    } else {
        Err(RebalanceError::InvalidFactor(k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipMode {
    /// Class 0 is the majority in both groups; class 0 is flipped in both.
    SameMajority0,
    /// Class 1 is the majority in both groups; class 1 is flipped in both.
    SameMajority1,
    /// Majorities differ; each group flips its own majority class.
    Mixed,
}

/// Per-group, per-class flip factors (probability of keeping a label).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipPlan {
    pub k0_c: f64,
    pub k1_c: f64,
    pub k0_t: f64,
    pub k1_t: f64,
    pub mode: FlipMode,
}

impl FlipPlan {
    pub fn identity() -> FlipPlan {
        FlipPlan {
            k0_c: 1.0,
            k1_c: 1.0,
            k0_t: 1.0,
            k1_t: 1.0,
            mode: FlipMode::SameMajority0,
        }
    }

    /// Flips `majority` in both groups with the shared factor `k`.
    pub fn same_majority(majority: u8, k: f64) -> Result<FlipPlan, RebalanceError> {
        check_factor(k)?;
        Ok(match majority {
            0 => FlipPlan {
                k0_c: k,
                k0_t: k,
                ..FlipPlan::identity()
            },
            1 => FlipPlan {
                k1_c: k,
                k1_t: k,
                mode: FlipMode::SameMajority1,
                ..FlipPlan::identity()
            },
            m => return Err(RebalanceError::InvalidPlan(format!("majority class {m}"))),
        })
    }

    /// Flips the treatment majority class in the treatment group and the
    /// opposite class in the control group, both with factor `k`.
    pub fn mixed(treatment_majority: u8, k: f64) -> Result<FlipPlan, RebalanceError> {
        check_factor(k)?;
        let base = FlipPlan {
            mode: FlipMode::Mixed,
            ..FlipPlan::identity()
        };
        Ok(match treatment_majority {
            1 => FlipPlan { k1_t: k, k0_c: k, ..base },
            0 => FlipPlan { k0_t: k, k1_c: k, ..base },
            m => return Err(RebalanceError::InvalidPlan(format!("majority class {m}"))),
        })
    }

    /// Builds a plan from explicit factors, checking every invariant.
    pub fn new(k0_c: f64, k1_c: f64, k0_t: f64, k1_t: f64, mode: FlipMode) -> Result<FlipPlan, RebalanceError> {
        let plan = FlipPlan {
            k0_c,
            k1_c,
            k0_t,
            k1_t,
            mode,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), RebalanceError> {
        for k in [self.k0_c, self.k1_c, self.k0_t, self.k1_t] {
            check_factor(k)?;
        }
        let bad = |m: &str| Err(RebalanceError::InvalidPlan(m.to_string()));
        if self.k0_c < 1.0 && self.k1_c < 1.0 || self.k0_t < 1.0 && self.k1_t < 1.0 {
            return bad("a group may flip only one class");
        }
        match self.mode {
            FlipMode::SameMajority0 if self.k1_c != 1.0 || self.k1_t != 1.0 || self.k0_c != self.k0_t => {
                bad("same-majority-0 plans need k1 = 1 and a shared k0")
            }
            FlipMode::SameMajority1 if self.k0_c != 1.0 || self.k0_t != 1.0 || self.k1_c != self.k1_t => {
                bad("same-majority-1 plans need k0 = 1 and a shared k1")
            }
            FlipMode::Mixed if !(self.k1_t == self.k0_c && self.k0_t == 1.0 && self.k1_c == 1.0)
                && !(self.k0_t == self.k1_c && self.k1_t == 1.0 && self.k0_c == 1.0) =>
            {
                bad("mixed plans flip opposite classes with a shared factor")
            }
            _ => Ok(()),
        }
    }

    /// Keep-probability for a record of `class` in `group`.
    pub fn factor(&self, group: Group, class: u8) -> f64 {
        match (group, class) {
            (Group::Control, 0) => self.k0_c,
            (Group::Control, _) => self.k1_c,
            (Group::Treatment, 0) => self.k0_t,
            (Group::Treatment, _) => self.k1_t,
        }
    }

    /// The shared flip factor.
    pub fn k(&self) -> f64 {
        [self.k0_c, self.k1_c, self.k0_t, self.k1_t]
            .into_iter()
            .fold(1.0, f64::min)
    }

    pub fn is_identity(&self) -> bool {
        self.k() == 1.0
    }

    /// Population map `P(Y=1|g) ↦ P(Y̆=1|g)`.
    pub fn flipped_rate(&self, group: Group, p1: f64) -> f64 {
        let k0 = self.factor(group, 0);
        let k1 = self.factor(group, 1);
        k1 * p1 + (1.0 - k0) * (1.0 - p1)
    }

    /// Uplift after flipping, `τ̆ = P(Y̆=1|T) − P(Y̆=1|C)`, from arm rates.
    pub fn forward_tau(&self, p1_t: f64, p1_c: f64) -> f64 {
        self.flipped_rate(Group::Treatment, p1_t) - self.flipped_rate(Group::Control, p1_c)
    }

    /// Linear map taking `τ̆` back to `τ`.
    pub fn recovery(&self) -> RecoveryTransform {
        let k = self.k();
        let offset = match self.mode {
            FlipMode::SameMajority0 | FlipMode::SameMajority1 => 0.0,
            // τ̆ = kτ + k − 1 when treatment flips class 1
            FlipMode::Mixed if self.k1_t < 1.0 => (1.0 - k) / k,
            // τ̆ = kτ + 1 − k when treatment flips class 0
            FlipMode::Mixed if self.k0_t < 1.0 => -(1.0 - k) / k,
            FlipMode::Mixed => 0.0,
        };
        RecoveryTransform { scale: 1.0 / k, offset }
    }
}

/// `τ = scale·τ̆ + offset`, clamped to `[−1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTransform {
    pub scale: f64,
    pub offset: f64,
}

impl RecoveryTransform {
    pub fn identity() -> Self {
        RecoveryTransform {
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn apply(&self, breve_tau: f64) -> f64 {
        (self.scale * breve_tau + self.offset).clamp(-1.0, 1.0)
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.offset == 0.0
    }
}

pub fn recover_tau(breve_tau: f64, transform: &RecoveryTransform) -> f64 {
    transform.apply(breve_tau)
}

/// Picks `k = 1 / (P(Y=m^C|C) + P(Y=m^T|T))`, flipping each group's
/// majority class. Capped at 1, which yields the identity plan.
pub fn compute_flip_factor(summary: &DatasetSummary) -> (FlipPlan, RecoveryTransform) {
    let denom = summary.majority_rate(Group::Control) + summary.majority_rate(Group::Treatment);
    let k = (1.0 / denom).min(1.0);
    let (mt, mc) = (summary.majority_treatment, summary.majority_control);
    let plan = if mt == mc {
        FlipPlan::same_majority(mt, k)
    } else {
        FlipPlan::mixed(mt, k)
    }
    .expect("k lies in (0, 1] because majority rates are at least 1/2");
    (plan, plan.recovery())
}

/// Replaces each record whose class is flipped with factor `k < 1` by two
/// records: the original label with weight `w·k` and the reversed label with
/// the remaining weight. Returns the expanded table and each output row's
/// source record.
fn expand(data: &LabeledData, factor: impl Fn(usize, u8) -> f64) -> (LabeledData, Vec<usize>) {
    let n = data.n();
    let p = data.p();
    let mut features = Vec::with_capacity(data.features().len());
    let mut response = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for i in 0..n {
        let y = data.response()[i];
        let w = data.weights()[i];
        let k = factor(i, y);
        features.extend_from_slice(data.row(i));
        response.push(y);
        source.push(i);
        if k < 1.0 {
            let kept = w * k;
            weight.push(kept);
            features.extend_from_slice(data.row(i));
            response.push(1 - y);
            weight.push(w - kept);
            source.push(i);
        } else {
            weight.push(w);
        }
    }
    debug_assert_eq!(features.len(), response.len() * p);
    (
        LabeledData::from_parts(data.feature_names().to_vec(), features, response, weight),
        source,
    )
}

/// Deterministic-weight flipping of a trial dataset.
pub fn flip_expand_weights(dataset: &RctDataset, plan: &FlipPlan) -> RctDataset {
    let group = dataset.group();
    let (data, source) = expand(dataset.labeled(), |i, y| plan.factor(group[i], y));
    let groups = source.iter().map(|&i| group[i]).collect();
    RctDataset::from_parts(data, groups)
}

/// Deterministic-weight flipping of `class` with factor `k` in a plain table.
pub fn flip_expand_labeled(data: &LabeledData, class: u8, k: f64) -> Result<LabeledData, RebalanceError> {
    check_factor(k)?;
    Ok(expand(data, |_, y| if y == class { k } else { 1.0 }).0)
}

/// Stochastic flipping: one uniform draw per record, labels reversed when the
/// draw exceeds the record's keep-factor.
pub fn flip_stochastic(dataset: &RctDataset, plan: &FlipPlan, seed: u64) -> RctDataset {
    let mut rng = rng::seeded(seed);
    let response = dataset
        .response()
        .iter()
        .zip(dataset.group())
        .map(|(&y, &g)| {
            let u: f64 = rng.random();
            if u <= plan.factor(g, y) {
                y
            } else {
                1 - y
            }
        })
        .collect();
    dataset.with_response_unchecked(response)
}

fn scaled_weights(dataset: &RctDataset, include: impl Fn(usize) -> bool, k: f64) -> RctDataset {
    let weights = dataset
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| if include(i) { w * k } else { w })
        .collect();
    dataset.with_weights_unchecked(weights)
}

/// Multiplies the weights of `target_class` records by `k` in both groups.
pub fn undersample_weights(dataset: &RctDataset, k: f64, target_class: u8) -> Result<RctDataset, RebalanceError> {
    check_factor(k)?;
    let y = dataset.response();
    Ok(scaled_weights(dataset, |i| y[i] == target_class, k))
}

/// Multiplies the weights of `target_class` records of one group by `k`.
pub fn undersample_weights_in_group(
    dataset: &RctDataset,
    k: f64,
    target_class: u8,
    group: Group,
) -> Result<RctDataset, RebalanceError> {
    check_factor(k)?;
    let y = dataset.response();
    let g = dataset.group();
    Ok(scaled_weights(dataset, |i| y[i] == target_class && g[i] == group, k))
}

/// Undersampling weights for a plain classification table.
pub fn undersample_labeled(data: &LabeledData, k: f64, target_class: u8) -> Result<LabeledData, RebalanceError> {
    check_factor(k)?;
    let weights = data
        .response()
        .iter()
        .zip(data.weights())
        .map(|(&y, &w)| if y == target_class { w * k } else { w })
        .collect();
    Ok(data.with_weights(weights)?)
}

/// `P*(Y=0|x)` after keeping a fraction `k` of class 0: `k·p0 / ((1−p0) + k·p0)`.
pub fn undersampled_prob(p0: f64, k: f64) -> f64 {
    let kept = k * p0;
    kept / ((1.0 - p0) + kept)
}

/// Inverts flipping in plain classification: `P(Y=0|x) = P(Y̆=0|x) / k`.
pub fn classification_prob_recovery(p_breve_0: f64, k: f64) -> f64 {
    (p_breve_0 / k).clamp(0.0, 1.0)
}

/// Result of [`treatment_balance_weights`].
#[derive(Clone, Debug)]
pub struct Balanced {
    pub dataset: RctDataset,
    /// Multiplier applied to the larger group (1 when already balanced).
    pub factor: f64,
    pub scaled_group: Option<Group>,
}

/// Down-weights the larger group by `l = W_small / W_large` so both groups
/// carry equal total weight.
pub fn treatment_balance_weights(dataset: &RctDataset) -> Result<Balanced, RebalanceError> {
    let wt = dataset.group_weight(Group::Treatment);
    let wc = dataset.group_weight(Group::Control);
    for (g, w) in [(Group::Treatment, wt), (Group::Control, wc)] {
        if w <= 0.0 {
            return Err(DataError::EmptyGroup(g).into());
        }
    }
    let (large, l) = if wt > wc {
        (Group::Treatment, wc / wt)
    } else {
        (Group::Control, wt / wc)
    };
    if l == 1.0 {
        return Ok(Balanced {
            dataset: dataset.clone(),
            factor: 1.0,
            scaled_group: None,
        });
    }
    let g = dataset.group();
    Ok(Balanced {
        dataset: scaled_weights(dataset, |i| g[i] == large, l),
        factor: l,
        scaled_group: Some(large),
    })
}

/// `|log( (ka/(1−ka)) / (kb/(1−kb)) )|` with `a = P*(Y=1|T)`, `b = P*(Y=0|C)`:
/// the dependence between the flipped transformed response and the group
/// when majority classes differ.
pub fn log_odds_dependence(a: f64, b: f64, k: f64) -> Result<f64, RebalanceError> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(a) || !open(b) || !open(k) || !(k * a < 1.0) || !(k * b < 1.0) {
        return Err(RebalanceError::Domain(format!("a={a}, b={b}, k={k}")));
    }
    let odds = |q: f64| (k * q) / (1.0 - k * q);
    Ok((odds(a) / odds(b)).ln().abs())
}
