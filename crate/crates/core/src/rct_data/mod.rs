//! Randomized-trial datasets: representation, ingestion, summaries and
//! synthetic generators with known ground-truth uplift.

mod ingest;
mod synthetic;

pub use ingest::{load_csv, load_labeled_csv, write_csv, Schema};
pub use synthetic::{
    generate_classification, generate_synthetic, sigmoid, ClassificationSpec, SyntheticSpec,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Assignment of a record to one of the two arms of the trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Control, Group::Treatment];

    pub fn is_treatment(self) -> bool {
        self == Group::Treatment
    }

    pub fn other(self) -> Group {
        match self {
            Group::Control => Group::Treatment,
            Group::Treatment => Group::Control,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset must contain at least one record")]
    Empty,
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("response at record {index} is {value}, expected 0 or 1")]
    NonBinaryResponse { index: usize, value: u8 },
    #[error("weight at record {index} is {value}; weights must be finite and non-negative")]
    InvalidWeight { index: usize, value: f64 },
    #[error("total weight must be positive")]
    ZeroTotalWeight,
    #[error("group {0:?} carries no weight")]
    EmptyGroup(Group),
    #[error("line {line}, column `{column}`: {message}")]
    Ingest {
        line: u64,
        column: String,
        message: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("sampling rate must lie in (0, 1], got {0}")]
    InvalidRate(f64),
}

/// Features, binary labels and record weights, without group information.
///
/// Features are stored row-major. This is the currency of plain
/// classification (the classifier benchmark) and the base of [`RctDataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledData {
    feature_names: Vec<String>,
    features: Vec<f64>,
    p: usize,
    response: Vec<u8>,
    weight: Vec<f64>,
}

impl LabeledData {
    /// Validates and builds a labeled table. `weight = None` means unit weights.
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        response: Vec<u8>,
        weight: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let n = response.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let p = feature_names.len();
        if features.len() != n * p {
            return Err(DataError::LengthMismatch {
                what: "feature matrix",
                got: features.len(),
                expected: n * p,
            });
        }
        if let Some((index, &value)) = response.iter().enumerate().find(|(_, &y)| y > 1) {
            return Err(DataError::NonBinaryResponse { index, value });
        }
        let weight = match weight {
            Some(w) => {
                if w.len() != n {
                    return Err(DataError::LengthMismatch {
                        what: "weights",
                        got: w.len(),
                        expected: n,
                    });
                }
                if let Some((index, &value)) = w
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !v.is_finite() || **v < 0.0)
                {
                    return Err(DataError::InvalidWeight { index, value });
                }
                w
            }
            None => vec![1.0; n],
        };
        if weight.iter().sum::<f64>() <= 0.0 {
            return Err(DataError::ZeroTotalWeight);
        }
        Ok(LabeledData {
            feature_names,
            features,
            p,
            response,
            weight,
        })
    }

    /// Builds without validation; callers guarantee the invariants.
    pub(crate) fn from_parts(
        feature_names: Vec<String>,
        features: Vec<f64>,
        response: Vec<u8>,
        weight: Vec<f64>,
    ) -> Self {
        let p = feature_names.len();
        debug_assert_eq!(features.len(), response.len() * p);
        debug_assert_eq!(weight.len(), response.len());
        LabeledData {
            feature_names,
            features,
            p,
            response,
            weight,
        }
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Row-major `n × p` feature matrix.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn response(&self) -> &[u8] {
        &self.response
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Weighted fraction of class-1 records.
    pub fn positive_rate(&self) -> f64 {
        let pos: f64 = self
            .response
            .iter()
            .zip(&self.weight)
            .filter(|(&y, _)| y == 1)
            .map(|(_, w)| w)
            .sum();
        pos / self.total_weight()
    }

    /// The more frequent class by weight (ties resolve to 0).
    pub fn majority_class(&self) -> u8 {
        u8::from(self.positive_rate() > 0.5)
    }

    /// Copies the records at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> LabeledData {
        let mut features = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        LabeledData::from_parts(
            self.feature_names.clone(),
            features,
            idx.iter().map(|&i| self.response[i]).collect(),
            idx.iter().map(|&i| self.weight[i]).collect(),
        )
    }

    /// Replaces the weight vector, revalidating it.
    pub fn with_weights(&self, weight: Vec<f64>) -> Result<LabeledData, DataError> {
        LabeledData::new(
            self.feature_names.clone(),
            self.features.clone(),
            self.response.clone(),
            Some(weight),
        )
    }

    /// Keeps each minority-class record independently with probability `rate`.
    pub fn subsample_minority(&self, rate: f64, seed: u64) -> Result<LabeledData, DataError> {
        let keep = minority_keep_mask(&self.response, self.majority_class(), rate, seed)?;
        let idx: Vec<usize> = (0..self.n()).filter(|&i| keep[i]).collect();
        if idx.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(self.select(&idx))
    }
}

fn minority_keep_mask(
    response: &[u8],
    majority: u8,
    rate: f64,
    seed: u64,
) -> Result<Vec<bool>, DataError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(DataError::InvalidRate(rate));
    }
    let mut rng = rng::seeded(seed);
    Ok(response
        .iter()
        .map(|&y| {
            // one draw per record keeps the stream aligned with record order
            let u: f64 = rng.random();
            y == majority || u < rate
        })
        .collect())
}

/// Features, response, group assignment and record weights of a randomized trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RctDataset {
    data: LabeledData,
    group: Vec<Group>,
}

impl RctDataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        response: Vec<u8>,
        group: Vec<Group>,
        weight: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let data = LabeledData::new(feature_names, features, response, weight)?;
        Self::from_labeled(data, group)
    }

    pub fn from_labeled(data: LabeledData, group: Vec<Group>) -> Result<Self, DataError> {
        if group.len() != data.n() {
            return Err(DataError::LengthMismatch {
                what: "group indicator",
                got: group.len(),
                expected: data.n(),
            });
        }
        Ok(RctDataset { data, group })
    }

    pub(crate) fn from_parts(data: LabeledData, group: Vec<Group>) -> Self {
        debug_assert_eq!(data.n(), group.len());
        RctDataset { data, group }
    }

    pub fn labeled(&self) -> &LabeledData {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn feature_names(&self) -> &[String] {
        self.data.feature_names()
    }

    pub fn features(&self) -> &[f64] {
        self.data.features()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn response(&self) -> &[u8] {
        self.data.response()
    }

    pub fn group(&self) -> &[Group] {
        &self.group
    }

    pub fn weights(&self) -> &[f64] {
        self.data.weights()
    }

    pub fn total_weight(&self) -> f64 {
        self.data.total_weight()
    }

    /// Total weight carried by the records of one arm.
    pub fn group_weight(&self, g: Group) -> f64 {
        self.group
            .iter()
            .zip(self.weights())
            .filter(|(&gi, _)| gi == g)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn group_indices(&self, g: Group) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.group[i] == g).collect()
    }

    pub fn select(&self, idx: &[usize]) -> RctDataset {
        RctDataset {
            data: self.data.select(idx),
            group: idx.iter().map(|&i| self.group[i]).collect(),
        }
    }

    /// Replaces the weight vector, revalidating it.
    pub fn with_weights(&self, weight: Vec<f64>) -> Result<RctDataset, DataError> {
        Ok(RctDataset {
            data: self.data.with_weights(weight)?,
            group: self.group.clone(),
        })
    }

    pub(crate) fn with_weights_unchecked(&self, weight: Vec<f64>) -> RctDataset {
        let d = &self.data;
        RctDataset {
            data: LabeledData::from_parts(
                d.feature_names.clone(),
                d.features.clone(),
                d.response.clone(),
                weight,
            ),
            group: self.group.clone(),
        }
    }

    pub(crate) fn with_response_unchecked(&self, response: Vec<u8>) -> RctDataset {
        let d = &self.data;
        RctDataset {
            data: LabeledData::from_parts(
                d.feature_names.clone(),
                d.features.clone(),
                response,
                d.weight.clone(),
            ),
            group: self.group.clone(),
        }
    }

    /// Keeps each minority-class record independently with probability `rate`.
    ///
    /// The minority class is determined over the pooled arms.
    pub fn subsample_minority(&self, rate: f64, seed: u64) -> Result<RctDataset, DataError> {
        let keep = minority_keep_mask(self.response(), self.data.majority_class(), rate, seed)?;
        let idx: Vec<usize> = (0..self.n()).filter(|&i| keep[i]).collect();
        if idx.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(self.select(&idx))
    }

    /// Uniform random subset of `m` records in their original order; the
    /// whole dataset when `m >= n`.
    pub fn sample_records(&self, m: usize, seed: u64) -> RctDataset {
        if m >= self.n() {
            return self.clone();
        }
        let mut idx = rand::seq::index::sample(&mut rng::seeded(seed), self.n(), m).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }
}

/// Weighted group shares and class rates of a trial dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    pub share_treatment: f64,
    pub share_control: f64,
    /// P̂(Y=1 | treatment)
    pub rate_treatment: f64,
    /// P̂(Y=1 | control)
    pub rate_control: f64,
    pub majority_treatment: u8,
    pub majority_control: u8,
}

impl DatasetSummary {
    pub fn share(&self, g: Group) -> f64 {
        match g {
            Group::Treatment => self.share_treatment,
            Group::Control => self.share_control,
        }
    }

    pub fn rate(&self, g: Group) -> f64 {
        match g {
            Group::Treatment => self.rate_treatment,
            Group::Control => self.rate_control,
        }
    }

    pub fn majority(&self, g: Group) -> u8 {
        match g {
            Group::Treatment => self.majority_treatment,
            Group::Control => self.majority_control,
        }
    }

    /// P̂(Y = m^g | g), the probability of the group's majority class.
    pub fn majority_rate(&self, g: Group) -> f64 {
        let r = self.rate(g);
        if self.majority(g) == 1 {
            r
        } else {
            1.0 - r
        }
    }

    /// Weighted positive rate over both arms.
    pub fn overall_rate(&self) -> f64 {
        self.share_treatment * self.rate_treatment + self.share_control * self.rate_control
    }
}

/// Weighted empirical summary; errors when either arm carries no weight.
pub fn summarize(dataset: &RctDataset) -> Result<DatasetSummary, DataError> {
    // [control, treatment] × [weight, positive weight]
    let mut acc = [[0.0f64; 2]; 2];
    for ((&g, &y), &w) in dataset
        .group()
        .iter()
        .zip(dataset.response())
        .zip(dataset.weights())
    {
        let a = &mut acc[usize::from(g.is_treatment())];
        a[0] += w;
        if y == 1 {
            a[1] += w;
        }
    }
    for g in Group::BOTH {
        if acc[usize::from(g.is_treatment())][0] <= 0.0 {
            return Err(DataError::EmptyGroup(g));
        }
    }
    let total = acc[0][0] + acc[1][0];
    let rate_control = acc[0][1] / acc[0][0];
    let rate_treatment = acc[1][1] / acc[1][0];
    Ok(DatasetSummary {
        n: dataset.n(),
        p: dataset.p(),
        share_treatment: acc[1][0] / total,
        share_control: acc[0][0] / total,
        rate_treatment,
        rate_control,
        majority_treatment: u8::from(rate_treatment > 0.5),
        majority_control: u8::from(rate_control > 0.5),
    })
}
