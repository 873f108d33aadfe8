//! Uplift curves, mAUUC, weighted AUROC and the two evaluation protocols
//! (repeated holdout for uplift models, repeated stratified cross-validation
//! for classifiers).
//!
//! Curve convention: after sorting records by `τ̂` descending, the gain at
//! targeted fraction `ρ` is `ρ·(R̄_T(ρ) − R̄_C(ρ))`, where `R̄_g(ρ)` is the
//! weighted response rate of group `g` among the top `⌈ρn⌉` records. Random
//! targeting then traces the diagonal from `(0, 0)` to `(1, g(1))`, and
//! mAUUC is `1000 × (area under the curve − g(1)/2)`.

mod auroc;
mod curve;
mod protocol;

pub use auroc::weighted_auroc;
pub use curve::{mauuc, ranking, uplift_curve, UpliftCurve, DEFAULT_GRID};
pub use protocol::{
    mean_std, repeated_holdout, stratified_cv_auroc, Correction, CvConfig, CvReport, EvalReport,
    HoldoutConfig,
};

use thiserror::Error;

use crate::learners::LearnerError;
use crate::metamodels::MetaError;
use crate::rct_data::Group;
use crate::rebalance::RebalanceError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite score at record {0}")]
    NonFinite(usize),
    #[error("{0:?} group carries no weight")]
    EmptyGroup(Group),
    #[error("both classes need positive weight")]
    SingleClass,
    #[error("curve grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("class {class} has {count} records, fewer than {folds} folds")]
    TooFewRecords { class: u8, count: usize, folds: usize },
    #[error("invalid evaluation settings: {0}")]
    InvalidConfig(String),
    #[error("repetition {rep}: no usable split after {attempts} attempts")]
    Degenerate { rep: usize, attempts: usize },
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Rebalance(#[from] RebalanceError),
}
