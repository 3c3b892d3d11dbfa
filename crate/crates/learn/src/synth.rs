// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic datasets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Dataset, Table};
use crate::error::Result;
use crate::loss::sigmoid;

/// Labels drawn from a logistic model: `P(y = 1 | x) = σ(θᵀx + b)` with
/// `x ~ N(0, I)` and `θ` of norm `signal`. Returns the data and the true `θ`.
pub fn logistic_model(n: usize, d: usize, signal: f64, bias: f64, seed: u64) -> Result<(Dataset, DVector<f64>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let theta = dir.normalize() * signal;
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|i| {
            let z = x.row(i).transpose().dot(&theta) + bias;
            if rng.gen::<f64>() < sigmoid(z) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok((Dataset::new(x, y)?, theta))
}

/// Two Gaussian classes with unit covariance whose means are `±sep/2` along a
/// random direction; `pos_rate` is the positive share.
pub fn gaussian_classes(n: usize, d: usize, sep: f64, pos_rate: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
    let mut x = DMatrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if rng.gen::<f64>() < pos_rate { 1.0 } else { -1.0 };
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            x[(i, j)] = noise + label * 0.5 * sep * dir[j];
        }
        y.push(label);
    }
    Dataset::new(x, y)
}

const IRIS_SPECIES: [&str; 3] = ["setosa", "versicolor", "virginica"];
const IRIS_MEAN: [[f64; 4]; 3] =
    [[5.006, 3.428, 1.462, 0.246], [5.936, 2.770, 4.260, 1.326], [6.588, 2.974, 5.552, 2.026]];
const IRIS_SD: [[f64; 4]; 3] =
    [[0.352, 0.379, 0.174, 0.105], [0.516, 0.314, 0.470, 0.198], [0.636, 0.322, 0.552, 0.275]];

/// Iris-shaped table: three species with per-class Gaussian measurements
/// matching the classic per-class means and deviations, rounded to 0.1 cm.
pub fn iris_like(per_class: usize, seed: u64) -> Table {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let header = ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"].map(String::from).to_vec();
    let mut rows = Vec::with_capacity(3 * per_class);
    for (c, name) in IRIS_SPECIES.iter().enumerate() {
        for _ in 0..per_class {
            let mut row: Vec<String> = (0..4)
                .map(|j| {
                    let v = Normal::new(IRIS_MEAN[c][j], IRIS_SD[c][j]).expect("positive deviation").sample(&mut rng);
                    format!("{:.1}", v.max(0.1))
                })
                .collect();
            row.push((*name).to_string());
            rows.push(row);
        }
    }
    Table { header, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelRule;

    #[test]
    fn logistic_model_is_seeded_and_balanced_at_zero_bias() {
        let (a, ta) = logistic_model(2000, 4, 2.0, 0.0, 7).unwrap();
        let (b, tb) = logistic_model(2000, 4, 2.0, 0.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!((ta.norm() - 2.0).abs() < 1e-12);
        let share = a.positives() as f64 / 2000.0;
        assert!((share - 0.5).abs() < 0.05);
    }

    #[test]
    fn gaussian_classes_respect_rate() {
        let data = gaussian_classes(4000, 3, 2.0, 0.2, 1).unwrap();
        let share = data.positives() as f64 / 4000.0;
        assert!((share - 0.2).abs() < 0.03);
    }

    #[test]
    fn iris_like_shape_and_labels() {
        let t = iris_like(50, 3);
        assert_eq!(t.rows.len(), 150);
        let features: Vec<String> = t.header[..4].to_vec();
        let data = t.to_dataset("species", &features, &LabelRule::OneVsRest("virginica".into())).unwrap();
        assert_eq!(data.positives(), 50);
        assert_eq!(data.d(), 4);
    }
}
