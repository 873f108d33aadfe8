//! Weighted, ridge-penalized logistic regression on standardized features.
//!
//! Objective, with `W` the total weight and `m` the number of records with
//! positive weight:
//!
//! ```text
//! J(b, β) = Σ (wᵢ/W)·[log(1 + e^ηᵢ) − yᵢηᵢ] + λ/(2m)·‖β‖²,   ηᵢ = b + β·zᵢ
//! ```
//!
//! where `zᵢ` are the features standardized by their weighted mean and
//! standard deviation. For unit weights this is the usual `C = 1/λ`
//! parameterization; scaling every weight by a constant leaves `J` unchanged.
//! Minimized by damped Newton steps, falling back to steepest descent when
//! the Hessian is not positive definite.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LearnerConfig, LearnerError, TrainView};
use crate::par;
use crate::rct_data::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    mean: Vec<f64>,
    /// 1/sd per feature, 0 for constant features.
    inv_scale: Vec<f64>,
    intercept: f64,
    coef: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.intercept + self.linear(x))
    }

    fn linear(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(self.inv_scale.iter().zip(&self.coef))
            .map(|((v, m), (s, b))| b * (v - m) * s)
            .sum()
    }

    /// Intercept on the standardized scale.
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Coefficients on the standardized scale.
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct Problem<'a> {
    z: Vec<f64>,
    p: usize,
    labels: &'a [u8],
    /// weights divided by their total
    w: Vec<f64>,
    ridge: f64,
}

struct Pass {
    loss: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.labels.len()
    }

    fn eta(&self, theta: &[f64], i: usize) -> f64 {
        let z = &self.z[i * self.p..(i + 1) * self.p];
        theta[0] + z.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        0.5 * self.ridge * theta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let parts = par::map_chunks(self.n(), |s, e| {
            (s..e)
                .filter(|&i| self.w[i] > 0.0)
                .map(|i| {
                    let eta = self.eta(theta, i);
                    self.w[i] * (softplus(eta) - f64::from(self.labels[i]) * eta)
                })
                .sum::<f64>()
        });
        parts.iter().sum::<f64>() + self.penalty(theta)
    }

    fn full(&self, theta: &[f64]) -> Pass {
        let d = self.p + 1;
        let parts = par::map_chunks(self.n(), |s, e| {
            let mut acc = Pass {
                loss: 0.0,
                grad: vec![0.0; d],
                hess: vec![0.0; d * d],
            };
            for i in s..e {
                let wi = self.w[i];
                if wi <= 0.0 {
                    continue;
                }
                let eta = self.eta(theta, i);
                let y = f64::from(self.labels[i]);
                let mu = sigmoid(eta);
                acc.loss += wi * (softplus(eta) - y * eta);
                let r = wi * (mu - y);
                let h = wi * mu * (1.0 - mu);
                let z = &self.z[i * self.p..(i + 1) * self.p];
                acc.grad[0] += r;
                acc.hess[0] += h;
                for a in 0..self.p {
                    acc.grad[a + 1] += r * z[a];
                    acc.hess[a + 1] += h * z[a];
                    let row = (a + 1) * d;
                    for b in a..self.p {
                        acc.hess[row + b + 1] += h * z[a] * z[b];
                    }
                }
            }
            acc
        });
        let mut total = Pass {
            loss: 0.0,
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
        };
        for part in parts {
            total.loss += part.loss;
            total.grad.iter_mut().zip(&part.grad).for_each(|(a, b)| *a += b);
            total.hess.iter_mut().zip(&part.hess).for_each(|(a, b)| *a += b);
        }
        // mirror the upper triangle
        for a in 0..d {
            for b in 0..a {
                total.hess[a * d + b] = total.hess[b * d + a];
            }
        }
        total.loss += self.penalty(theta);
        for j in 1..d {
            total.grad[j] += self.ridge * theta[j];
            total.hess[j * d + j] += self.ridge;
        }
        total
    }
}

fn newton_direction(pass: &Pass, d: usize) -> Option<Vec<f64>> {
    let h = DMatrix::from_row_slice(d, d, &pass.hess);
    let g = DVector::from_column_slice(&pass.grad);
    let chol = h.cholesky()?;
    let step = chol.solve(&(-g));
    step.iter().all(|v| v.is_finite()).then(|| step.iter().copied().collect())
}

pub fn fit_logistic(view: TrainView<'_>, config: &LearnerConfig) -> Result<LogisticModel, LearnerError> {
    config.validate()?;
    view.check_finite()?;
    let (total, positive) = view.class_weights();
    if !(total > 0.0) {
        return Err(LearnerError::Empty);
    }
    if positive <= 0.0 || positive >= total {
        return Err(LearnerError::Degenerate("logistic"));
    }
    let n = view.n();
    let p = view.p;

    let mut mean = vec![0.0; p];
    for i in 0..n {
        let wi = view.weights[i] / total;
        for (m, v) in mean.iter_mut().zip(view.row(i)) {
            *m += wi * v;
        }
    }
    let mut var = vec![0.0; p];
    for i in 0..n {
        let wi = view.weights[i] / total;
        for ((s, v), m) in var.iter_mut().zip(view.row(i)).zip(&mean) {
            *s += wi * (v - m) * (v - m);
        }
    }
    let inv_scale: Vec<f64> = var
        .iter()
        .zip(&mean)
        .map(|(&v, &m)| {
            let sd = v.sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    let mut z = Vec::with_capacity(n * p);
    for i in 0..n {
        z.extend(
            view.row(i)
                .iter()
                .zip(&mean)
                .zip(&inv_scale)
                .map(|((v, m), s)| (v - m) * s),
        );
    }
    let effective = view.weights.iter().filter(|&&w| w > 0.0).count() as f64;
    let problem = Problem {
        z,
        p,
        labels: view.labels,
        w: view.weights.iter().map(|w| w / total).collect(),
        ridge: config.optimizer.l2_penalty / effective,
    };

    let d = p + 1;
    let base = positive / total;
    let mut theta = vec![0.0; d];
    theta[0] = (base / (1.0 - base)).ln();
    let opt = &config.optimizer;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opt.max_iterations {
        let pass = problem.full(&theta);
        let gmax = pass.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < opt.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = newton_direction(&pass, d).unwrap_or_else(|| pass.grad.iter().map(|g| -g).collect());
        let mut slope: f64 = dir.iter().zip(&pass.grad).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            dir = pass.grad.iter().map(|g| -g).collect();
            slope = -pass.grad.iter().map(|g| g * g).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let l = problem.loss(&cand);
            if l <= pass.loss + 1e-4 * t * slope {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(c) => theta = c,
            // no decrease representable in floating point: at the optimum
            None => {
                converged = gmax < opt.tolerance.sqrt();
                break;
            }
        }
    }
    Ok(LogisticModel {
        mean,
        inv_scale,
        intercept: theta[0],
        coef: theta[1..].to_vec(),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l2: f64) -> LearnerConfig {
        let mut c = LearnerConfig::logistic();
        c.optimizer.l2_penalty = l2;
        c
    }

    #[test]
    fn symmetric_pair_predicts_half_at_origin() {
        let x = [1.0, -1.0];
        let y = [1u8, 0];
        let m = fit_logistic(TrainView::new(&x, 1, &y, &[1.0, 1.0]), &cfg(1e-3)).unwrap();
        assert!((m.predict_proba(&[0.0]) - 0.5).abs() < 1e-6);
        assert!(m.predict_proba(&[1.0]) > 0.9);
    }

    #[test]
    fn weight_scaling_is_a_no_op() {
        let x = [0.1, 0.5, -0.3, 2.0, 1.1, -1.4, 0.7];
        let y = [0u8, 1, 0, 1, 1, 0, 0];
        let w = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 0.25];
        let w10: Vec<f64> = w.iter().map(|v| v * 10.0).collect();
        let a = fit_logistic(TrainView::new(&x, 1, &y, &w), &cfg(1.0)).unwrap();
        let b = fit_logistic(TrainView::new(&x, 1, &y, &w10), &cfg(1.0)).unwrap();
        assert!((a.intercept() - b.intercept()).abs() < 1e-8);
        assert!((a.coefficients()[0] - b.coefficients()[0]).abs() < 1e-8);
    }

    #[test]
    fn constant_features_get_zero_coefficient() {
        let x = [3.0, 1.0, 3.0, 2.0, 3.0, 0.0, 3.0, 5.0];
        let y = [0u8, 1, 0, 1];
        let m = fit_logistic(TrainView::new(&x, 2, &y, &[1.0; 4]), &cfg(1.0)).unwrap();
        assert_eq!(m.coefficients()[0], 0.0);
        assert!(m.converged());
    }

    #[test]
    fn rejects_non_finite_and_single_class() {
        let y = [0u8, 1];
        let err = fit_logistic(TrainView::new(&[0.0, f64::NAN], 1, &y, &[1.0, 1.0]), &cfg(1.0));
        assert!(matches!(err, Err(LearnerError::NonFinite { record: 1, feature: 0 })));
        let err = fit_logistic(TrainView::new(&[0.0, 1.0], 1, &[0, 0], &[1.0, 1.0]), &cfg(1.0));
        assert!(matches!(err, Err(LearnerError::Degenerate(_))));
        // zero weight on the only positive makes the data single-class
        let err = fit_logistic(TrainView::new(&[0.0, 1.0], 1, &y, &[1.0, 0.0]), &cfg(1.0));
        assert!(matches!(err, Err(LearnerError::Degenerate(_))));
    }

    #[test]
    fn matches_intercept_mle() {
        let y = [1u8, 0, 0, 0, 1];
        let w = [0.5, 1.0, 2.0, 1.0, 1.5];
        let m = fit_logistic(TrainView::new(&[], 0, &y, &w), &cfg(1.0)).unwrap();
        assert!((m.predict_proba(&[]) - 2.0 / 6.0).abs() < 1e-12);
    }
}
