//! Random forest without bootstrap: every tree sees the full weighted data
//! and randomness enters only through per-node feature subsets.

use serde::{Deserialize, Serialize};

use super::tree::{FeatureDraw, Grower};
use super::{LearnerConfig, LearnerError, TrainView, TreeModel};
use crate::{par, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }
}

/// Tree `t` draws features from a stream seeded by `(config.seed, t)`, so
/// the result does not depend on how trees are scheduled.
pub fn fit_forest(view: TrainView<'_>, config: &LearnerConfig) -> Result<ForestModel, LearnerError> {
    config.validate()?;
    view.check_finite()?;
    if view.n() == 0 || !(view.total_weight() > 0.0) {
        return Err(LearnerError::Empty);
    }
    let per_split = config.features_per_split_for(view.p)?;
    let trees = par::map_indexed(config.n_trees, |t| {
        let draw = if per_split >= view.p {
            FeatureDraw::All
        } else {
            FeatureDraw::Random {
                per_split,
                rng: rng::seeded(rng::derive_seed(config.seed, t as u64)),
            }
        };
        Grower::new(view, config, draw).grow()
    });
    Ok(ForestModel { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_tree;

    fn data() -> (Vec<f64>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200u32 {
            let a = f64::from(i % 17) / 17.0;
            let b = f64::from((i * 7) % 23) / 23.0;
            let c = f64::from((i * 13) % 11) / 11.0;
            x.extend([a, b, c]);
            y.push(u8::from(a + 0.5 * b > 0.7 || (i % 9 == 0)));
        }
        (x, y)
    }

    #[test]
    fn single_tree_all_features_matches_tree() {
        let (x, y) = data();
        let w = vec![1.0; y.len()];
        let view = TrainView::new(&x, 3, &y, &w);
        let mut cfg = LearnerConfig::forest(1, 0.02);
        cfg.features_per_split = Some(3);
        let f = fit_forest(view, &cfg).unwrap();
        let t = fit_tree(view, &cfg).unwrap();
        assert_eq!(f.trees()[0], t);
    }

    #[test]
    fn seeded_forests_are_reproducible_and_bounded() {
        let (x, y) = data();
        let w = vec![1.0; y.len()];
        let view = TrainView::new(&x, 3, &y, &w);
        let cfg = LearnerConfig::forest(8, 0.01).with_seed(5);
        let a = fit_forest(view, &cfg).unwrap();
        let b = fit_forest(view, &cfg).unwrap();
        assert_eq!(a, b);
        for i in 0..y.len() {
            let p = a.predict_proba(&x[i * 3..i * 3 + 3]);
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(p.to_bits(), b.predict_proba(&x[i * 3..i * 3 + 3]).to_bits());
        }
    }
}
