//! Uplift metamodels turning weighted base classifiers into CATE predictors.
//!
//! Every fitted [`CateModel`] carries a [`Provenance`] listing the transforms
//! applied to its training data together with the linear map that takes the
//! raw estimate back to the uplift scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{self, LearnerConfig, LearnerError, ProbModel};
use crate::par;
use crate::rct_data::{summarize, DataError, Group, RctDataset};
use crate::rebalance::{
    self, compute_flip_factor, FlipPlan, RebalanceError, RecoveryTransform,
};

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("{0:?} group is empty or carries no weight")]
    EmptyGroup(Group),
    #[error(
        "majority classes differ (treatment {treatment}, control {control}); \
         the flipped transformed response stays dependent on the group for every k > 0"
    )]
    MixedMajority { treatment: u8, control: u8 },
    #[error("unknown metamodel `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Rebalance(#[from] RebalanceError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metamodel {
    TwoModel,
    Ddr,
    Cvt,
    StratifiedCvt,
    FlippedCvt,
    FlippedTwoModel,
    FlippedDdr,
}

impl Metamodel {
    pub const ALL: [Metamodel; 7] = [
        Metamodel::TwoModel,
        Metamodel::Ddr,
        Metamodel::Cvt,
        Metamodel::StratifiedCvt,
        Metamodel::FlippedCvt,
        Metamodel::FlippedTwoModel,
        Metamodel::FlippedDdr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metamodel::TwoModel => "TwoModel",
            Metamodel::Ddr => "DDR",
            Metamodel::Cvt => "CVT",
            Metamodel::StratifiedCvt => "StratifiedCVT",
            Metamodel::FlippedCvt => "FlippedCVT",
            Metamodel::FlippedTwoModel => "FlippedTwoModel",
            Metamodel::FlippedDdr => "FlippedDDR",
        }
    }

    pub fn fit(self, dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
        match self {
            Metamodel::TwoModel => fit_two_model(dataset, config),
            Metamodel::Ddr => fit_ddr(dataset, config),
            Metamodel::Cvt => fit_cvt(dataset, config),
            Metamodel::StratifiedCvt => fit_stratified_cvt(dataset, config),
            Metamodel::FlippedCvt => fit_flipped_cvt(dataset, config),
            Metamodel::FlippedTwoModel => fit_flipped(dataset, Inner::TwoModel, config),
            Metamodel::FlippedDdr => fit_flipped(dataset, Inner::Ddr, config),
        }
    }
}

impl fmt::Display for Metamodel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metamodel {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Metamodel::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "tlearner" | "twomodels" => Some(Metamodel::TwoModel),
                _ => None,
            })
            .ok_or_else(|| MetaError::Unknown(s.to_string()))
    }
}

/// Inner metamodel of the generic flip wrapper.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inner {
    TwoModel,
    Ddr,
}

/// One training-time transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// Weights of `group` multiplied by `factor` to equalize group weight.
    Balance { group: Group, factor: f64 },
    /// Weights of each group's `class` records multiplied by `k`.
    Undersample {
        k: f64,
        class_treatment: u8,
        class_control: u8,
    },
    /// Deterministic-weight flipping.
    Flip(FlipPlan),
    /// Response reversed in the control group.
    ClassTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: Metamodel,
    pub learner: LearnerConfig,
    pub steps: Vec<Step>,
    pub recovery: RecoveryTransform,
}

impl Provenance {
    pub fn flip_plan(&self) -> Option<&FlipPlan> {
        self.steps.iter().find_map(|s| match s {
            Step::Flip(p) => Some(p),
            _ => None,
        })
    }

    /// The first group-balancing factor, if any balancing took place.
    pub fn balance_factor(&self) -> Option<f64> {
        self.steps.iter().find_map(|s| match s {
            Step::Balance { factor, .. } => Some(*factor),
            _ => None,
        })
    }

    pub fn undersample_factor(&self) -> Option<f64> {
        self.steps.iter().find_map(|s| match s {
            Step::Undersample { k, .. } => Some(*k),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Estimator {
    /// `p̂_T(x) − p̂_C(x)`.
    Difference { treatment: ProbModel, control: ProbModel },
    /// `p̂_T(x, p̂_C(x)) − p̂_C(x)`.
    Dependent { treatment: ProbModel, control: ProbModel },
    /// `2·p̂(x) − 1` for a model of the transformed response.
    Transformed(ProbModel),
}

impl Estimator {
    fn raw(&self, x: &[f64]) -> f64 {
        match self {
            Estimator::Difference { treatment, control } => {
                treatment.predict_proba(x) - control.predict_proba(x)
            }
            Estimator::Dependent { treatment, control } => {
                let pc = control.predict_proba(x);
                let mut ext = Vec::with_capacity(x.len() + 1);
                ext.extend_from_slice(x);
                ext.push(pc);
                treatment.predict_proba(&ext) - pc
            }
            Estimator::Transformed(m) => 2.0 * m.predict_proba(x) - 1.0,
        }
    }
}

/// A fitted CATE predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CateModel {
    estimator: Estimator,
    provenance: Provenance,
}

impl CateModel {
    /// `τ̂(x)` in `[−1, 1]`.
    pub fn predict_cate(&self, x: &[f64]) -> f64 {
        self.provenance.recovery.apply(self.estimator.raw(x))
    }

    /// Estimate on the scale the model was trained on, before recovery.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.estimator.raw(x)
    }

    pub fn predict_rows(&self, features: &[f64], n: usize) -> Vec<f64> {
        let p = if n == 0 { 0 } else { features.len() / n };
        par::map_chunks(n, |s, e| {
            (s..e)
                .map(|i| self.predict_cate(&features[i * p..(i + 1) * p]))
                .collect::<Vec<_>>()
        })
        .concat()
    }

    pub fn predict_dataset(&self, dataset: &RctDataset) -> Vec<f64> {
        self.predict_rows(dataset.features(), dataset.n())
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn to_json(&self) -> Result<String, LearnerError> {
        Ok(serde_json::to_string(self).map_err(LearnerError::from)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        Ok(serde_json::from_str(s)?)
    }
}

fn require_groups(dataset: &RctDataset) -> Result<(), MetaError> {
    for g in Group::BOTH {
        if dataset.group_weight(g) <= 0.0 {
            return Err(MetaError::EmptyGroup(g));
        }
    }
    Ok(())
}

fn fit_arm(dataset: &RctDataset, g: Group, config: &LearnerConfig) -> Result<ProbModel, MetaError> {
    let arm = dataset.select(&dataset.group_indices(g));
    Ok(learners::fit_or_constant(arm.view(), config)?)
}

fn provenance(kind: Metamodel, config: &LearnerConfig, steps: Vec<Step>, recovery: RecoveryTransform) -> Provenance {
    Provenance {
        kind,
        learner: *config,
        steps,
        recovery,
    }
}

pub fn fit_two_model(dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    require_groups(dataset)?;
    let treatment = fit_arm(dataset, Group::Treatment, config)?;
    let control = fit_arm(dataset, Group::Control, config)?;
    Ok(CateModel {
        estimator: Estimator::Difference { treatment, control },
        provenance: provenance(Metamodel::TwoModel, config, vec![], RecoveryTransform::identity()),
    })
}

pub fn fit_ddr(dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    require_groups(dataset)?;
    let control = fit_arm(dataset, Group::Control, config)?;

    let idx = dataset.group_indices(Group::Treatment);
    let arm = dataset.select(&idx);
    let p = arm.p();
    let mut ext = Vec::with_capacity(arm.n() * (p + 1));
    for i in 0..arm.n() {
        let x = arm.row(i);
        ext.extend_from_slice(x);
        ext.push(control.predict_proba(x));
    }
    let view = learners::TrainView::new(&ext, p + 1, arm.response(), arm.weights());
    let treatment = learners::fit_or_constant(view, config)?;
    Ok(CateModel {
        estimator: Estimator::Dependent { treatment, control },
        provenance: provenance(Metamodel::Ddr, config, vec![], RecoveryTransform::identity()),
    })
}

fn balance(dataset: &RctDataset, steps: &mut Vec<Step>) -> Result<RctDataset, MetaError> {
    let b = rebalance::treatment_balance_weights(dataset)?;
    if let Some(group) = b.scaled_group {
        steps.push(Step::Balance {
            group,
            factor: b.factor,
        });
    }
    Ok(b.dataset)
}

/// Reverses the response of control records.
pub fn class_transform(dataset: &RctDataset) -> RctDataset {
    let response = dataset
        .response()
        .iter()
        .zip(dataset.group())
        .map(|(&y, &g)| if g.is_treatment() { y } else { 1 - y })
        .collect();
    dataset.with_response_unchecked(response)
}

/// Balances groups, applies the class transform and fits one classifier.
fn fit_transformed(
    dataset: &RctDataset,
    config: &LearnerConfig,
    mut steps: Vec<Step>,
) -> Result<(ProbModel, Vec<Step>), MetaError> {
    let balanced = balance(dataset, &mut steps)?;
    let transformed = class_transform(&balanced);
    steps.push(Step::ClassTransform);
    let model = learners::fit_or_constant(transformed.view(), config)?;
    Ok((model, steps))
}

pub fn fit_cvt(dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    require_groups(dataset)?;
    let (model, steps) = fit_transformed(dataset, config, vec![])?;
    Ok(CateModel {
        estimator: Estimator::Transformed(model),
        provenance: provenance(Metamodel::Cvt, config, steps, RecoveryTransform::identity()),
    })
}

/// Balances groups, undersamples each group's majority class with the shared
/// factor `k = 1 / (P*(Y=m^C|C) + P*(Y=m^T|T))`, then fits CVT (which
/// re-balances the groups). No correction is applied to the output.
pub fn fit_stratified_cvt(dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    require_groups(dataset)?;
    let mut steps = vec![];
    let balanced = balance(dataset, &mut steps)?;
    let summary = summarize(&balanced)?;
    let k = compute_flip_factor(&summary).0.k();
    let (mt, mc) = (summary.majority_treatment, summary.majority_control);
    let under = if k < 1.0 {
        steps.push(Step::Undersample {
            k,
            class_treatment: mt,
            class_control: mc,
        });
        let d = rebalance::undersample_weights_in_group(&balanced, k, mt, Group::Treatment)?;
        rebalance::undersample_weights_in_group(&d, k, mc, Group::Control)?
    } else {
        balanced
    };
    let (model, steps) = fit_transformed(&under, config, steps)?;
    Ok(CateModel {
        estimator: Estimator::Transformed(model),
        provenance: provenance(Metamodel::StratifiedCvt, config, steps, RecoveryTransform::identity()),
    })
}

/// Training table of a flipped CVT fit.
#[derive(Clone, Debug)]
pub struct FlippedCvtTraining {
    /// Balanced, flipped and class-transformed data.
    pub dataset: RctDataset,
    pub plan: FlipPlan,
    pub steps: Vec<Step>,
}

/// Builds the flipped CVT training table: balance groups, pick `k` from the
/// balanced rates, flip the shared majority class, reverse control labels.
pub fn prepare_flipped_cvt(dataset: &RctDataset) -> Result<FlippedCvtTraining, MetaError> {
    require_groups(dataset)?;
    let mut steps = vec![];
    let balanced = balance(dataset, &mut steps)?;
    let summary = summarize(&balanced)?;
    let (treatment, control) = (summary.majority_treatment, summary.majority_control);
    if treatment != control {
        return Err(MetaError::MixedMajority { treatment, control });
    }
    let (plan, _) = compute_flip_factor(&summary);
    let flipped = if plan.is_identity() {
        balanced
    } else {
        steps.push(Step::Flip(plan));
        rebalance::flip_expand_weights(&balanced, &plan)
    };
    steps.push(Step::ClassTransform);
    Ok(FlippedCvtTraining {
        dataset: class_transform(&flipped),
        plan,
        steps,
    })
}

pub fn fit_flipped_cvt(dataset: &RctDataset, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    let training = prepare_flipped_cvt(dataset)?;
    let model = learners::fit_or_constant(training.dataset.view(), config)?;
    let recovery = if training.plan.is_identity() {
        RecoveryTransform::identity()
    } else {
        RecoveryTransform {
            scale: 1.0 / training.plan.k(),
            offset: 0.0,
        }
    };
    Ok(CateModel {
        estimator: Estimator::Transformed(model),
        provenance: provenance(Metamodel::FlippedCvt, config, training.steps, recovery),
    })
}

/// Flips each group's majority class with the factor chosen from the
/// observed rates, fits `inner` on the flipped data and maps its estimate
/// back with the plan's recovery transform.
pub fn fit_flipped(dataset: &RctDataset, inner: Inner, config: &LearnerConfig) -> Result<CateModel, MetaError> {
    config.validate()?;
    require_groups(dataset)?;
    let (plan, recovery) = compute_flip_factor(&summarize(dataset)?);
    let flipped = if plan.is_identity() {
        dataset.clone()
    } else {
        rebalance::flip_expand_weights(dataset, &plan)
    };
    let (fitted, kind) = match inner {
        Inner::TwoModel => (fit_two_model(&flipped, config)?, Metamodel::FlippedTwoModel),
        Inner::Ddr => (fit_ddr(&flipped, config)?, Metamodel::FlippedDdr),
    };
    let steps = if plan.is_identity() {
        vec![]
    } else {
        vec![Step::Flip(plan)]
    };
    Ok(CateModel {
        estimator: fitted.estimator,
        provenance: provenance(kind, config, steps, recovery),
    })
}
