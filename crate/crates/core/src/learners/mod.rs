//! Weighted probabilistic base classifiers.
//!
//! Every learner consumes a [`TrainView`] (features, binary labels, record
//! weights) and produces a [`ProbModel`] estimating `P(Y=1|x)`. Weights are
//! treated as frequency weights throughout, and fits are invariant to a
//! common rescaling of all weights.

mod forest;
mod logistic;
mod tree;

pub use forest::{fit_forest, ForestModel};
pub use logistic::{fit_logistic, LogisticModel};
pub use tree::{fit_tree, Node, TreeModel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::rct_data::{LabeledData, RctDataset};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training data is empty or carries no weight")]
    Empty,
    #[error("training data contains a single class; cannot fit a {0} model")]
    Degenerate(&'static str),
    #[error("non-finite value for feature {feature} at record {record}")]
    NonFinite { record: usize, feature: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("model serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

/// Borrowed training table.
#[derive(Clone, Copy, Debug)]
pub struct TrainView<'a> {
    pub features: &'a [f64],
    pub p: usize,
    pub labels: &'a [u8],
    pub weights: &'a [f64],
}

impl<'a> TrainView<'a> {
    pub fn new(features: &'a [f64], p: usize, labels: &'a [u8], weights: &'a [f64]) -> Self {
        debug_assert_eq!(features.len(), labels.len() * p);
        debug_assert_eq!(labels.len(), weights.len());
        TrainView {
            features,
            p,
            labels,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// (total weight, class-1 weight)
    pub fn class_weights(&self) -> (f64, f64) {
        self.labels
            .iter()
            .zip(self.weights)
            .fold((0.0, 0.0), |(w, w1), (&y, &wi)| {
                (w + wi, if y == 1 { w1 + wi } else { w1 })
            })
    }

    fn check_finite(&self) -> Result<(), LearnerError> {
        match self.features.iter().position(|v| !v.is_finite()) {
            Some(k) if self.p > 0 => Err(LearnerError::NonFinite {
                record: k / self.p,
                feature: k % self.p,
            }),
            _ => Ok(()),
        }
    }
}

impl LabeledData {
    pub fn view(&self) -> TrainView<'_> {
        TrainView::new(self.features(), self.p(), self.response(), self.weights())
    }
}

impl RctDataset {
    /// The dataset as a classification table on the observed response.
    pub fn view(&self) -> TrainView<'_> {
        self.labeled().view()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    Logistic,
    Tree,
    Forest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop once the gradient max-norm drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Ridge strength on standardized coefficients (intercept free).
    pub l2_penalty: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tolerance: 1e-8,
            max_iterations: 1000,
            l2_penalty: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Minimum weight of a leaf as a fraction of the total training weight.
    pub min_leaf_weight_frac: f64,
    pub max_depth: usize,
    pub n_trees: usize,
    /// Features examined per node in forests; `None` means ⌈√p⌉.
    pub features_per_split: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn logistic() -> Self {
        LearnerConfig {
            kind: LearnerKind::Logistic,
            min_leaf_weight_frac: 0.01,
            max_depth: 100,
            n_trees: 1,
            features_per_split: None,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }

    pub fn tree(min_leaf_weight_frac: f64) -> Self {
        LearnerConfig {
            kind: LearnerKind::Tree,
            min_leaf_weight_frac,
            ..Self::logistic()
        }
    }

    pub fn forest(n_trees: usize, min_leaf_weight_frac: f64) -> Self {
        LearnerConfig {
            kind: LearnerKind::Forest,
            min_leaf_weight_frac,
            n_trees,
            ..Self::logistic()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks invariants that do not depend on the data.
    pub fn validate(&self) -> Result<(), LearnerError> {
        let a = self.min_leaf_weight_frac;
        if !(a > 0.0 && a <= 0.5) {
            return Err(LearnerError::InvalidConfig(format!(
                "min_leaf_weight_frac must lie in (0, 0.5], got {a}"
            )));
        }
        if self.max_depth == 0 {
            return Err(LearnerError::InvalidConfig("max_depth must be positive".into()));
        }
        if self.n_trees == 0 {
            return Err(LearnerError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(LearnerError::InvalidConfig(
                "features_per_split must be at least 1".into(),
            ));
        }
        let o = &self.optimizer;
        if !(o.tolerance > 0.0) || o.max_iterations == 0 || !(o.l2_penalty >= 0.0) {
            return Err(LearnerError::InvalidConfig(format!("bad optimizer settings {o:?}")));
        }
        Ok(())
    }

    /// Features examined per node for a `p`-dimensional problem.
    pub fn features_per_split_for(&self, p: usize) -> Result<usize, LearnerError> {
        match self.features_per_split {
            Some(m) if m > p && p > 0 => Err(LearnerError::InvalidConfig(format!(
                "features_per_split {m} exceeds dimension {p}"
            ))),
            Some(m) => Ok(m.min(p)),
            None => Ok((p as f64).sqrt().ceil() as usize),
        }
    }
}

/// Short label in the `LR` / `DT_α` / `RF_n_α` convention.
impl fmt::Display for LearnerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LearnerKind::Logistic => write!(f, "LR"),
            LearnerKind::Tree => write!(f, "DT_{}", self.min_leaf_weight_frac),
            LearnerKind::Forest => write!(f, "RF_{}_{}", self.n_trees, self.min_leaf_weight_frac),
        }
    }
}

impl FromStr for LearnerConfig {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LearnerError::InvalidConfig(format!("cannot parse learner `{s}`"));
        let parts: Vec<&str> = s.trim().split('_').collect();
        let cfg = match parts.as_slice() {
            ["LR"] | ["logistic"] => LearnerConfig::logistic(),
            ["DT", a] => LearnerConfig::tree(a.parse().map_err(|_| bad())?),
            ["RF", n, a] => {
                LearnerConfig::forest(n.parse().map_err(|_| bad())?, a.parse().map_err(|_| bad())?)
            }
            _ => return Err(bad()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A fitted classifier estimating `P(Y=1|x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProbModel {
    /// Base-rate predictor, used when a training subset holds a single class.
    Constant(f64),
    Logistic(LogisticModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl ProbModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            ProbModel::Constant(p) => *p,
            ProbModel::Logistic(m) => m.predict_proba(x),
            ProbModel::Tree(m) => m.predict_proba(x),
            ProbModel::Forest(m) => m.predict_proba(x),
        }
    }

    /// Predicts each of the `n` rows of a row-major feature matrix.
    pub fn predict_rows(&self, features: &[f64], n: usize) -> Vec<f64> {
        let p = if n == 0 { 0 } else { features.len() / n };
        par::map_chunks(n, |s, e| {
            (s..e)
                .map(|i| self.predict_proba(&features[i * p..(i + 1) * p]))
                .collect::<Vec<_>>()
        })
        .concat()
    }

    pub fn to_json(&self) -> Result<String, LearnerError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits the learner named by `config.kind`.
pub fn fit(view: TrainView<'_>, config: &LearnerConfig) -> Result<ProbModel, LearnerError> {
    match config.kind {
        LearnerKind::Logistic => fit_logistic(view, config).map(ProbModel::Logistic),
        LearnerKind::Tree => fit_tree(view, config).map(ProbModel::Tree),
        LearnerKind::Forest => fit_forest(view, config).map(ProbModel::Forest),
    }
}

/// Like [`fit`], but falls back to a base-rate predictor when the training
/// data carries a single class.
pub fn fit_or_constant(
    view: TrainView<'_>,
    config: &LearnerConfig,
) -> Result<ProbModel, LearnerError> {
    let (w, w1) = view.class_weights();
    if !(w > 0.0) {
        return Err(LearnerError::Empty);
    }
    if w1 <= 0.0 || w1 >= w {
        return Ok(ProbModel::Constant(w1 / w));
    }
    fit(view, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_labels_round_trip() {
        for s in ["LR", "DT_0.05", "RF_10_0.01", "RF_100_0.001"] {
            let cfg: LearnerConfig = s.parse().unwrap();
            assert_eq!(cfg.to_string(), s);
        }
        assert!("DT_0.7".parse::<LearnerConfig>().is_err());
        assert!("RF_0_0.1".parse::<LearnerConfig>().is_err());
        assert!("XX".parse::<LearnerConfig>().is_err());
    }

    #[test]
    fn features_per_split_default_is_ceil_sqrt() {
        let cfg = LearnerConfig::forest(10, 0.01);
        assert_eq!(cfg.features_per_split_for(10).unwrap(), 4);
        assert_eq!(cfg.features_per_split_for(9).unwrap(), 3);
        assert_eq!(cfg.features_per_split_for(1).unwrap(), 1);
        let cfg = LearnerConfig {
            features_per_split: Some(5),
            ..cfg
        };
        assert!(cfg.features_per_split_for(4).is_err());
    }

    #[test]
    fn intercept_only_learners_predict_base_rate() {
        let labels = [1u8, 0, 0, 1, 0, 0, 0, 1];
        let weights = [1.0, 2.0, 0.5, 3.0, 1.0, 1.0, 1.5, 0.25];
        let view = TrainView::new(&[], 0, &labels, &weights);
        let (w, w1) = view.class_weights();
        let rate = w1 / w;
        for cfg in [
            LearnerConfig::logistic(),
            LearnerConfig::tree(0.01),
            LearnerConfig::forest(3, 0.01),
        ] {
            let m = fit(view, &cfg).unwrap();
            assert!((m.predict_proba(&[]) - rate).abs() < 1e-6, "{cfg}");
        }
    }

    #[test]
    fn constant_fallback_for_single_class() {
        let labels = [1u8, 1];
        let view = TrainView::new(&[0.0, 1.0], 1, &labels, &[1.0, 1.0]);
        assert!(matches!(
            fit(view, &LearnerConfig::logistic()),
            Err(LearnerError::Degenerate(_))
        ));
        let m = fit_or_constant(view, &LearnerConfig::logistic()).unwrap();
        assert_eq!(m, ProbModel::Constant(1.0));
    }
}
