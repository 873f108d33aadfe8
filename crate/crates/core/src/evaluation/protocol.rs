use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{mauuc, uplift_curve, weighted_auroc, EvalError, UpliftCurve, DEFAULT_GRID};
use crate::learners::{self, LearnerConfig};
use crate::metamodels::Metamodel;
use crate::par;
use crate::rct_data::{Group, LabeledData, RctDataset};
use crate::rebalance;
use crate::rng::{derive_seed, seeded};

/// Mean and sample standard deviation (`n − 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn join(values: impl IntoIterator<Item = impl fmt::Display>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutConfig {
    pub reps: usize,
    pub train_frac: f64,
    pub seed: u64,
    pub grid_size: usize,
    /// Split attempts per repetition before giving up.
    pub max_attempts: usize,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        HoldoutConfig {
            reps: 100,
            train_frac: 0.7,
            seed: 0,
            grid_size: DEFAULT_GRID,
            max_attempts: 100,
        }
    }
}

impl HoldoutConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.reps == 0 || self.max_attempts == 0 {
            return Err(EvalError::InvalidConfig("reps and max_attempts must be positive".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "train_frac must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        if self.grid_size < 2 {
            return Err(EvalError::GridTooSmall(self.grid_size));
        }
        Ok(())
    }
}

/// Aggregated repeated-holdout results for one (metamodel, learner) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metamodel: String,
    pub learner: String,
    pub seed: u64,
    pub train_frac: f64,
    /// Per-repetition test-set mAUUC.
    pub mauuc: Vec<f64>,
    /// Seed of the split actually used by each repetition.
    pub rep_seeds: Vec<u64>,
    /// Splits discarded because a group or class vanished.
    pub retries: usize,
    pub mean: f64,
    pub std: f64,
    pub curve: UpliftCurve,
}

impl EvalReport {
    pub fn reps(&self) -> usize {
        self.mauuc.len()
    }

    /// Line-oriented `key=value` text.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "metamodel={}", self.metamodel);
        let _ = writeln!(s, "learner={}", self.learner);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "reps={}", self.reps());
        let _ = writeln!(s, "train_frac={}", self.train_frac);
        let _ = writeln!(s, "retries={}", self.retries);
        let _ = writeln!(s, "absent_group_points={}", self.curve.absent_group_points);
        let _ = writeln!(s, "mauuc_mean={}", self.mean);
        let _ = writeln!(s, "mauuc_std={}", self.std);
        let _ = writeln!(s, "mauuc={}", join(&self.mauuc));
        let _ = writeln!(s, "rep_seeds={}", join(&self.rep_seeds));
        let _ = writeln!(s, "curve_fraction={}", join(&self.curve.fractions));
        let _ = writeln!(s, "curve_gain={}", join(&self.curve.gains));
        s
    }
}

struct RepOutcome {
    mauuc: f64,
    seed: u64,
    retries: usize,
    curve: UpliftCurve,
}

fn usable_split(train: &RctDataset, test: &RctDataset) -> bool {
    let has = |d: &RctDataset, g: Group| d.group_weight(g) > 0.0;
    let classes = |d: &RctDataset| {
        let w1: f64 = d
            .response()
            .iter()
            .zip(d.weights())
            .filter(|(&y, _)| y == 1)
            .map(|(_, &w)| w)
            .sum();
        w1 > 0.0 && w1 < d.total_weight()
    };
    Group::BOTH.into_iter().all(|g| has(train, g) && has(test, g)) && classes(train)
}

fn split(n: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

fn holdout_rep(
    dataset: &RctDataset,
    metamodel: Metamodel,
    learner: &LearnerConfig,
    cfg: &HoldoutConfig,
    rep: usize,
) -> Result<RepOutcome, EvalError> {
    let rep_base = derive_seed(cfg.seed, rep as u64);
    for attempt in 0..cfg.max_attempts {
        let seed = derive_seed(rep_base, attempt as u64);
        let (tr, te) = split(dataset.n(), cfg.train_frac, seed);
        let train = dataset.select(&tr);
        let test = dataset.select(&te);
        if !usable_split(&train, &test) {
            continue;
        }
        let model = metamodel.fit(&train, &learner.with_seed(derive_seed(seed, u64::MAX)))?;
        let curve = uplift_curve(&model.predict_dataset(&test), &test, cfg.grid_size)?;
        return Ok(RepOutcome {
            mauuc: mauuc(&curve),
            seed,
            retries: attempt,
            curve,
        });
    }
    Err(EvalError::Degenerate {
        rep,
        attempts: cfg.max_attempts,
    })
}

/// Repeated random train/test splits; fits on the training part and scores
/// the uplift curve on the test part. Repetitions run in parallel and their
/// seeds depend only on `(cfg.seed, rep)`.
pub fn repeated_holdout(
    dataset: &RctDataset,
    metamodel: Metamodel,
    learner: &LearnerConfig,
    cfg: &HoldoutConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    learner.validate()?;
    let outcomes = par::map_indexed(cfg.reps, |rep| holdout_rep(dataset, metamodel, learner, cfg, rep))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = outcomes.iter().map(|o| o.mauuc).collect();
    let curves: Vec<UpliftCurve> = outcomes.iter().map(|o| o.curve.clone()).collect();
    let (mean, std) = mean_std(&values);
    Ok(EvalReport {
        metamodel: metamodel.to_string(),
        learner: learner.to_string(),
        seed: cfg.seed,
        train_frac: cfg.train_frac,
        rep_seeds: outcomes.iter().map(|o| o.seed).collect(),
        retries: outcomes.iter().map(|o| o.retries).sum(),
        mauuc: values,
        mean,
        std,
        curve: UpliftCurve::mean(&curves).expect("at least one repetition on a shared grid"),
    })
}

/// Class-imbalance correction applied to each training fold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Correction {
    None,
    /// Flip the majority class with `k = 1 / (2·P(Y=m))`.
    Flipping,
    /// Down-weight the majority class by `W_minority / W_majority`.
    Undersampling,
}

impl Correction {
    pub const ALL: [Correction; 3] = [Correction::None, Correction::Flipping, Correction::Undersampling];

    /// Weighted training table after correction, and the factor used.
    pub fn apply(self, data: &LabeledData) -> Result<(LabeledData, f64), EvalError> {
        let total = data.total_weight();
        let maj = data.majority_class();
        let w_maj = if maj == 1 {
            data.positive_rate() * total
        } else {
            (1.0 - data.positive_rate()) * total
        };
        let k = match self {
            Correction::None => 1.0,
            Correction::Flipping => (total / (2.0 * w_maj)).min(1.0),
            Correction::Undersampling => ((total - w_maj) / w_maj).min(1.0),
        };
        if k >= 1.0 {
            return Ok((data.clone(), 1.0));
        }
        let out = match self {
            Correction::Flipping => rebalance::flip_expand_labeled(data, maj, k)?,
            _ => rebalance::undersample_labeled(data, k, maj)?,
        };
        Ok((out, k))
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::None => "none",
            Correction::Flipping => "flipping",
            Correction::Undersampling => "undersampling",
        })
    }
}

impl FromStr for Correction {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Correction::None),
            "flipping" | "flip" => Ok(Correction::Flipping),
            "undersampling" | "under" => Ok(Correction::Undersampling),
            _ => Err(EvalError::InvalidConfig(format!("unknown correction `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            reps: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub correction: Correction,
    pub folds: usize,
    pub seed: u64,
    /// Held-out AUROC of every fold, grouped by repetition.
    pub fold_values: Vec<Vec<f64>>,
    /// Mean fold AUROC of each repetition.
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Fold index of every record; each class is shuffled and dealt round-robin.
fn stratified_folds(response: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut fold = vec![0; response.len()];
    // the deal continues across classes so fold sizes differ by at most one
    let mut pos = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..response.len()).filter(|&i| response[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = pos % folds;
            pos += 1;
        }
    }
    fold
}

/// Repeated stratified k-fold AUROC of a classifier under `correction`.
///
/// Scores are the corrected model's raw probabilities: the probability
/// recovery after flipping is monotone, so AUROC is unaffected by it.
pub fn stratified_cv_auroc(
    data: &LabeledData,
    learner: &LearnerConfig,
    correction: Correction,
    cfg: &CvConfig,
) -> Result<CvReport, EvalError> {
    learner.validate()?;
    if cfg.folds < 2 || cfg.reps == 0 {
        return Err(EvalError::InvalidConfig("need folds >= 2 and reps >= 1".into()));
    }
    for class in [0u8, 1] {
        let count = data.response().iter().filter(|&&y| y == class).count();
        if count == 0 {
            return Err(EvalError::SingleClass);
        }
        if count < cfg.folds {
            return Err(EvalError::TooFewRecords {
                class,
                count,
                folds: cfg.folds,
            });
        }
    }
    let fold_values = par::map_indexed(cfg.reps, |rep| {
        let seed = derive_seed(cfg.seed, rep as u64);
        let fold = stratified_folds(data.response(), cfg.folds, seed);
        (0..cfg.folds)
            .map(|f| {
                let (te, tr): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| fold[i] == f);
                let (train, _) = correction.apply(&data.select(&tr))?;
                let cfg = learner.with_seed(derive_seed(seed, f as u64));
                let model = learners::fit(train.view(), &cfg)?;
                let test = data.select(&te);
                let scores = model.predict_rows(test.features(), test.n());
                weighted_auroc(&scores, test.response(), test.weights())
            })
            .collect::<Result<Vec<f64>, EvalError>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = fold_values
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let (mean, std) = mean_std(&values);
    Ok(CvReport {
        classifier: learner.to_string(),
        correction,
        folds: cfg.folds,
        seed: cfg.seed,
        fold_values,
        values,
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_by_hand() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<u8> = (0..103).map(|i| u8::from(i % 10 == 0)).collect();
        let fold = stratified_folds(&y, 5, 3);
        for f in 0..5 {
            let pos = (0..y.len()).filter(|&i| fold[i] == f && y[i] == 1).count();
            let all = fold.iter().filter(|&&x| x == f).count();
            assert!((2..=3).contains(&pos));
            assert!((20..=21).contains(&all));
        }
    }

    #[test]
    fn corrections_balance_classes() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 10)).collect();
        let d = LabeledData::new(vec![], vec![], y, None).unwrap();
        let (f, k) = Correction::Flipping.apply(&d).unwrap();
        assert!((k - 100.0 / 180.0).abs() < 1e-15);
        assert!((f.positive_rate() - 0.5).abs() < 1e-12);
        let (u, k) = Correction::Undersampling.apply(&d).unwrap();
        assert!((k - 10.0 / 90.0).abs() < 1e-15);
        assert!((u.positive_rate() - 0.5).abs() < 1e-12);
        let (n, k) = Correction::None.apply(&d).unwrap();
        assert_eq!((n, k), (d, 1.0));
    }
}
