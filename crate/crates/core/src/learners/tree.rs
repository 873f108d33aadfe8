//! Weighted CART-style classification tree.
//!
//! Splits are axis-aligned thresholds at midpoints between consecutive
//! distinct feature values, chosen to minimize weighted Gini impurity. A
//! split is admissible only when both children carry at least
//! `min_leaf_weight_frac × total weight`. Equal-impurity candidates resolve
//! to the lowest feature index, then the lowest threshold.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearnerConfig, LearnerError, TrainView};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// weighted class-1 fraction
        prob: f64,
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

impl TreeModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { prob, .. } => return *prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// `(prob, weight)` of every leaf.
    pub fn leaves(&self) -> Vec<(f64, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { prob, weight } => Some((*prob, *weight)),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Gini impurity times node weight: `2·w₁·w₀ / w`.
pub(crate) fn gini_cost(w: f64, w1: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        2.0 * w1 * (w - w1) / w
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub cost: f64,
    pub feature: usize,
    pub threshold: f64,
}

/// Strictly better under the (impurity, feature, threshold) order, with
/// impurities closer than `eps` counted as equal.
pub(crate) fn better(a: &Candidate, b: &Candidate, eps: f64) -> bool {
    if a.cost < b.cost - eps {
        return true;
    }
    if a.cost > b.cost + eps {
        return false;
    }
    (a.feature, a.threshold) < (b.feature, b.threshold)
}

/// Feature selection rule for one tree.
pub(crate) enum FeatureDraw {
    All,
    Random { per_split: usize, rng: ChaCha8Rng },
}

pub(crate) struct Grower<'a> {
    view: TrainView<'a>,
    min_leaf: f64,
    eps: f64,
    max_depth: usize,
    draw: FeatureDraw,
    nodes: Vec<Node>,
}

impl<'a> Grower<'a> {
    pub(crate) fn new(view: TrainView<'a>, config: &LearnerConfig, draw: FeatureDraw) -> Self {
        let total = view.total_weight();
        Grower {
            view,
            min_leaf: config.min_leaf_weight_frac * total,
            eps: 1e-12 * total,
            max_depth: config.max_depth,
            draw,
            nodes: Vec::new(),
        }
    }

    pub(crate) fn grow(mut self) -> TreeModel {
        let idx: Vec<usize> = (0..self.view.n()).collect();
        self.build(idx, 0);
        TreeModel { nodes: self.nodes }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (w, w1) = idx.iter().fold((0.0, 0.0), |(w, w1), &i| {
            let wi = self.view.weights[i];
            (w + wi, if self.view.labels[i] == 1 { w1 + wi } else { w1 })
        });
        let at = self.nodes.len();
        let prob = if w > 0.0 { w1 / w } else { 0.0 };
        self.nodes.push(Node::Leaf { prob, weight: w });
        let parent = gini_cost(w, w1);
        if depth >= self.max_depth || parent <= self.eps || w < 2.0 * self.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&idx, w, w1) else {
            return at;
        };
        if best.cost >= parent - self.eps {
            return at;
        }
        let f = best.feature;
        let p = self.view.p;
        let (li, ri): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.view.features[i * p + f] <= best.threshold);
        let left = self.build(li, depth + 1);
        let right = self.build(ri, depth + 1);
        self.nodes[at] = Node::Split {
            feature: f,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn feature_order(&mut self) -> (Vec<usize>, usize) {
        let p = self.view.p;
        match &mut self.draw {
            FeatureDraw::All => ((0..p).collect(), p),
            FeatureDraw::Random { per_split, rng } => {
                let mut order: Vec<usize> = (0..p).collect();
                order.shuffle(rng);
                (order, *per_split)
            }
        }
    }

    /// Evaluates features in draw order; after `per_split` features the
    /// search stops as soon as an admissible split has been seen, so a node
    /// only becomes a leaf when no feature at all admits a split.
    fn best_split(&mut self, idx: &[usize], w: f64, w1: f64) -> Option<Candidate> {
        let (order, per_split) = self.feature_order();
        let mut best: Option<Candidate> = None;
        let mut sorted = idx.to_vec();
        for (k, &f) in order.iter().enumerate() {
            if k >= per_split && best.is_some() {
                break;
            }
            if let Some(c) = self.best_on_feature(&mut sorted, f, w, w1) {
                if best.as_ref().is_none_or(|b| better(&c, b, self.eps)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_on_feature(&self, sorted: &mut [usize], f: usize, w: f64, w1: f64) -> Option<Candidate> {
        let v = self.view;
        let p = v.p;
        let x = |i: usize| v.features[i * p + f];
        sorted.sort_unstable_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
        let mut best: Option<Candidate> = None;
        let (mut wl, mut w1l) = (0.0, 0.0);
        for k in 0..sorted.len() - 1 {
            let i = sorted[k];
            wl += v.weights[i];
            if v.labels[i] == 1 {
                w1l += v.weights[i];
            }
            let (a, b) = (x(i), x(sorted[k + 1]));
            if a >= b {
                continue;
            }
            let wr = w - wl;
            if wl < self.min_leaf || wr < self.min_leaf {
                continue;
            }
            let cost = gini_cost(wl, w1l) + gini_cost(wr, w1 - w1l);
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                threshold = a;
            }
            let c = Candidate {
                cost,
                feature: f,
                threshold,
            };
            if best.as_ref().is_none_or(|bst| better(&c, bst, self.eps)) {
                best = Some(c);
            }
        }
        best
    }
}

pub fn fit_tree(view: TrainView<'_>, config: &LearnerConfig) -> Result<TreeModel, LearnerError> {
    config.validate()?;
    view.check_finite()?;
    if view.n() == 0 || !(view.total_weight() > 0.0) {
        return Err(LearnerError::Empty);
    }
    Ok(Grower::new(view, config, FeatureDraw::All).grow())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_data_is_a_single_leaf() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1u8; 4];
        let t = fit_tree(TrainView::new(&x, 1, &y, &[1.0; 4]), &LearnerConfig::tree(0.01)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_proba(&[10.0]), 1.0);
    }

    #[test]
    fn separable_data_one_split_near_zero() {
        let x: Vec<f64> = (-50..50).map(|i| f64::from(i) + 0.5).collect();
        let y: Vec<u8> = x.iter().map(|&v| u8::from(v > 0.0)).collect();
        let t = fit_tree(TrainView::new(&x, 1, &y, &vec![1.0; 100]), &LearnerConfig::tree(0.001)).unwrap();
        let (f, thr) = t.root_split().unwrap();
        assert_eq!(f, 0);
        assert_eq!(thr, 0.0);
        assert_eq!(t.depth(), 1);
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(v, &yy)| (t.predict_proba(&[**v]) > 0.5) == (yy == 1))
            .count();
        assert_eq!(acc, 100);
    }

    #[test]
    fn depth_limit_respected() {
        let x: Vec<f64> = (0..64).map(f64::from).collect();
        let y: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let mut cfg = LearnerConfig::tree(0.001);
        cfg.max_depth = 3;
        let t = fit_tree(TrainView::new(&x, 1, &y, &[1.0; 64]), &cfg).unwrap();
        assert!(t.depth() <= 3);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // two identical columns: every split ties across features
        let x = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let y = [0u8, 0, 1, 1];
        let t = fit_tree(TrainView::new(&x, 2, &y, &[1.0; 4]), &LearnerConfig::tree(0.01)).unwrap();
        assert_eq!(t.root_split(), Some((0, 1.5)));
    }
}
