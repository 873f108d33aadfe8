use super::EvalError;

/// Weighted Mann–Whitney AUROC: the weighted share of (positive, negative)
/// pairs in which the positive scores higher, ties counting one half.
pub fn weighted_auroc(scores: &[f64], labels: &[u8], weights: &[f64]) -> Result<f64, EvalError> {
    let n = scores.len();
    for len in [labels.len(), weights.len()] {
        if len != n {
            return Err(EvalError::LengthMismatch { expected: n, got: len });
        }
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NonFinite(i));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let (mut neg_below, mut pos_total, mut pairs) = (0.0, 0.0, 0.0);
    let mut start = 0;
    while start < n {
        let mut end = start;
        let (mut pos, mut neg) = (0.0, 0.0);
        while end < n && scores[idx[end]] == scores[idx[start]] {
            let i = idx[end];
            if labels[i] == 1 {
                pos += weights[i];
            } else {
                neg += weights[i];
            }
            end += 1;
        }
        pairs += pos * neg_below + 0.5 * pos * neg;
        neg_below += neg;
        pos_total += pos;
        start = end;
    }
    if !(pos_total > 0.0 && neg_below > 0.0) {
        return Err(EvalError::SingleClass);
    }
    Ok(pairs / (pos_total * neg_below))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_and_ties() {
        let y = [0, 0, 1, 1];
        let w = [1.0; 4];
        assert_eq!(weighted_auroc(&[0.1, 0.2, 0.8, 0.9], &y, &w).unwrap(), 1.0);
        assert_eq!(weighted_auroc(&[0.9, 0.8, 0.2, 0.1], &y, &w).unwrap(), 0.0);
        assert_eq!(weighted_auroc(&[0.5; 4], &y, &w).unwrap(), 0.5);
        assert!(weighted_auroc(&[0.5; 2], &[1, 1], &[1.0; 2]).is_err());
    }

    #[test]
    fn weights_count_as_copies() {
        let s = [0.3, 0.1, 0.2, 0.4];
        let y = [1, 0, 1, 0];
        let a = weighted_auroc(&s, &y, &[2.0, 1.0, 1.0, 1.0]).unwrap();
        let b = weighted_auroc(&[0.3, 0.3, 0.1, 0.2, 0.4], &[1, 1, 0, 1, 0], &[1.0; 5]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
