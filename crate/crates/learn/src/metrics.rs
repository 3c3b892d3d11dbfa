// SPDX-License-Identifier: Apache-2.0

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{LearnError, Result};

/// Test metrics on a 0-100 scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
}

/// Accuracy of `sign(θ·x)` (score 0 counts as positive), rank AUC of the
/// scores and F1 on the positive class.
pub fn evaluate(theta: &DVector<f64>, test: &Dataset) -> Result<Metrics> {
    if theta.len() != test.d() {
        return Err(LearnError::Shape(format!("model has {} weights, data {} features", theta.len(), test.d())));
    }
    let scores: Vec<f64> = (&test.x * theta).iter().copied().collect();
    score_metrics(&scores, &test.y)
}

/// [`Metrics`] of precomputed scores against labels in {-1, +1}.
pub fn score_metrics(scores: &[f64], y: &[f64]) -> Result<Metrics> {
    if scores.len() != y.len() {
        return Err(LearnError::Shape(format!("{} scores but {} labels", scores.len(), y.len())));
    }
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(y) {
        let pred_pos = s >= 0.0;
        let pos = y > 0.0;
        if pred_pos == pos {
            correct += 1;
        }
        match (pred_pos, pos) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    Ok(Metrics {
        accuracy: 100.0 * correct as f64 / y.len() as f64,
        auc: 100.0 * auc(scores, y)?,
        f1: if denom == 0 { 0.0 } else { 100.0 * (2 * tp) as f64 / denom as f64 },
    })
}

/// Mann-Whitney AUC in [0, 1] with midranks for tied scores.
pub fn auc(scores: &[f64], y: &[f64]) -> Result<f64> {
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LearnError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if y[k] > 0.0 {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn pairwise_auc(s: &[f64], y: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] > 0.0 && y[j] < 0.0 {
                    den += 1.0;
                    num += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_separator() {
        let x = DMatrix::from_row_slice(4, 1, &[2.0, 1.0, -1.0, -3.0]);
        let data = Dataset::new(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let m = evaluate(&DVector::from_element(1, 1.0), &data).unwrap();
        assert_eq!((m.accuracy, m.auc, m.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn inverted_scores_complement_auc() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(50, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..50).map(|i| if x[(i, 0)] + 0.5 * rng.gen::<f64>() > 0.2 { 1.0 } else { -1.0 }).collect();
        let data = Dataset::new(x, y).unwrap();
        let t = DVector::from_vec(vec![1.0, -0.3]);
        let a = evaluate(&t, &data).unwrap().auc;
        let b = evaluate(&(-t), &data).unwrap().auc;
        assert!((a + b - 100.0).abs() < 1e-9);
    }

    #[test]
    fn auc_matches_quadratic_oracle_with_ties() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let s: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6))).collect();
            let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.4) { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            assert!((auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(auc(&[1.0, 2.0], &[1.0, 1.0]), Err(LearnError::SingleClass)));
    }
}
