use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rct_data::RctDataset;

pub const DEFAULT_GRID: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpliftCurve {
    /// Evenly spaced targeted fractions from 0 to 1.
    pub fractions: Vec<f64>,
    pub gains: Vec<f64>,
    /// Grid points whose top set lacked one of the groups (rate taken as 0).
    pub absent_group_points: usize,
}

impl UpliftCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.fractions
            .windows(2)
            .zip(self.gains.windows(2))
            .map(|(f, g)| (f[1] - f[0]) * (g[0] + g[1]) / 2.0)
            .sum()
    }

    /// Pointwise mean of curves sharing one grid.
    pub fn mean(curves: &[UpliftCurve]) -> Option<UpliftCurve> {
        let first = curves.first()?;
        let len = first.gains.len();
        if curves.iter().any(|c| c.gains.len() != len) {
            return None;
        }
        let mut gains = vec![0.0; len];
        for c in curves {
            for (s, g) in gains.iter_mut().zip(&c.gains) {
                *s += g;
            }
        }
        let reps = curves.len() as f64;
        gains.iter_mut().for_each(|g| *g /= reps);
        Some(UpliftCurve {
            fractions: first.fractions.clone(),
            gains,
            absent_group_points: curves.iter().map(|c| c.absent_group_points).sum(),
        })
    }

    /// `fraction,gain` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,gain\n");
        for (f, g) in self.fractions.iter().zip(&self.gains) {
            out.push_str(&format!("{f},{g}\n"));
        }
        out
    }
}

/// Record indices ordered by score descending; ties keep index order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

pub fn uplift_curve(tau_hat: &[f64], dataset: &RctDataset, grid_size: usize) -> Result<UpliftCurve, EvalError> {
    let n = dataset.n();
    if tau_hat.len() != n {
        return Err(EvalError::LengthMismatch {
            expected: n,
            got: tau_hat.len(),
        });
    }
    if let Some(i) = tau_hat.iter().position(|t| !t.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    if grid_size < 2 {
        return Err(EvalError::GridTooSmall(grid_size));
    }
    for g in crate::rct_data::Group::BOTH {
        if dataset.group_weight(g) <= 0.0 {
            return Err(EvalError::EmptyGroup(g));
        }
    }

    // prefix[m] holds [w_C, w_C·y, w_T, w_T·y] over the top m records
    let order = ranking(tau_hat);
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = [0.0f64; 4];
    prefix.push(acc);
    for &i in &order {
        let w = dataset.weights()[i];
        let base = if dataset.group()[i].is_treatment() { 2 } else { 0 };
        acc[base] += w;
        if dataset.response()[i] == 1 {
            acc[base + 1] += w;
        }
        prefix.push(acc);
    }

    let steps = grid_size - 1;
    let mut fractions = Vec::with_capacity(grid_size);
    let mut gains = Vec::with_capacity(grid_size);
    let mut absent_group_points = 0;
    for j in 0..grid_size {
        let rho = j as f64 / steps as f64;
        let m = (j * n).div_ceil(steps);
        let [wc, yc, wt, yt] = prefix[m];
        let rate = |w: f64, y: f64| if w > 0.0 { y / w } else { 0.0 };
        if m > 0 && (wc <= 0.0 || wt <= 0.0) {
            absent_group_points += 1;
        }
        fractions.push(rho);
        gains.push(rho * (rate(wt, yt) - rate(wc, yc)));
    }
    Ok(UpliftCurve {
        fractions,
        gains,
        absent_group_points,
    })
}

pub fn mauuc(curve: &UpliftCurve) -> f64 {
    let end = curve.gains.last().copied().unwrap_or(0.0);
    1000.0 * (curve.area() - end / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rct_data::Group;

    fn curve(fractions: Vec<f64>, gains: Vec<f64>) -> UpliftCurve {
        UpliftCurve {
            fractions,
            gains,
            absent_group_points: 0,
        }
    }

    #[test]
    fn mauuc_examples() {
        // area 0.5·0.2 + 0.5·0.4 = 0.3, diagonal 0.2
        let c = curve(vec![0.0, 0.5, 1.0], vec![0.0, 0.4, 0.4]);
        assert!((mauuc(&c) - 100.0).abs() < 1e-9);
        let diag = curve(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![0.0, 0.025, 0.05, 0.075, 0.1]);
        assert!(mauuc(&diag).abs() < 1e-12);
    }

    #[test]
    fn full_population_gain() {
        let d = RctDataset::new(
            vec![],
            vec![],
            vec![1, 0, 1, 1, 0],
            vec![Group::Treatment, Group::Treatment, Group::Control, Group::Control, Group::Control],
            None,
        )
        .unwrap();
        for tau in [[0.1, 0.2, 0.3, 0.4, 0.5], [0.0; 5]] {
            let c = uplift_curve(&tau, &d, 11).unwrap();
            assert_eq!(c.gains[0], 0.0);
            assert!((c.gains[10] - (0.5 - 2.0 / 3.0)).abs() < 1e-15);
            assert!(c.fractions.windows(2).all(|w| w[1] > w[0]));
        }
        assert!(uplift_curve(&[0.0; 4], &d, 11).is_err());
        assert!(uplift_curve(&[0.0; 5], &d, 1).is_err());
    }

    #[test]
    fn ties_keep_index_order() {
        assert_eq!(ranking(&[0.1, 0.3, 0.1, 0.3]), vec![1, 3, 0, 2]);
    }
}
