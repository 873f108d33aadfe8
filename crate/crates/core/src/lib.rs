//! Class-flipping imbalance correction for uplift modeling on randomized
//! controlled trial data.
//!
//! The crate covers the whole pipeline: trial datasets ([`rct_data`]),
//! distribution-modifying transforms ([`rebalance`]), weighted base
//! classifiers ([`learners`]), uplift metamodels ([`metamodels`]) and uplift
//! curve / AUROC evaluation protocols ([`evaluation`]).

pub mod evaluation;
pub mod learners;
pub mod metamodels;
pub mod par;
pub mod rct_data;
pub mod rebalance;
pub mod rng;

pub use learners::{LearnerConfig, LearnerKind, ProbModel};
pub use metamodels::{CateModel, Metamodel};
pub use rct_data::{DatasetSummary, Group, LabeledData, RctDataset};
pub use rebalance::{FlipPlan, RecoveryTransform};
