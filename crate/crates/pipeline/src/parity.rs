// SPDX-License-Identifier: Apache-2.0

//! Taylor against logistic training on the same cross-validation folds.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vfl_learn::synth::{gaussian_classes, logistic_model};
use vfl_learn::{score_metrics, train_sag, Dataset, LabelRule, LossKind, Metrics, Standardizer, Table, TrainConfig};
use vfl_theory::Report;

use crate::error::{PipelineError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Parity {
    pub name: String,
    pub taylor: Metrics,
    pub logistic: Metrics,
    /// Epochs summed over the folds.
    pub epochs: (usize, usize),
}

impl Parity {
    /// `(accuracy, auc)` differences, Taylor minus logistic, in points.
    pub fn deltas(&self) -> (f64, f64) {
        (self.taylor.accuracy - self.logistic.accuracy, self.taylor.auc - self.logistic.auc)
    }

    pub fn within(&self, points: f64) -> bool {
        let (a, u) = self.deltas();
        a.abs() <= points && u.abs() <= points
    }
}

impl Report for Parity {
    fn fields(&self) -> Vec<(String, String)> {
        let (a, u) = self.deltas();
        vec![
            ("taylor.accuracy".into(), format!("{:.4}", self.taylor.accuracy)),
            ("taylor.auc".into(), format!("{:.4}", self.taylor.auc)),
            ("logistic.accuracy".into(), format!("{:.4}", self.logistic.accuracy)),
            ("logistic.auc".into(), format!("{:.4}", self.logistic.auc)),
            ("delta.accuracy".into(), format!("{a:.4}")),
            ("delta.auc".into(), format!("{u:.4}")),
            ("epochs.taylor".into(), self.epochs.0.to_string()),
            ("epochs.logistic".into(), self.epochs.1.to_string()),
        ]
    }
}

/// SAG settings of the comparison: `η = 0.05`, ridge `θᵀ(10⁻² I)θ`.
pub fn parity_config(d: usize, loss: LossKind) -> TrainConfig {
    TrainConfig {
        eta: 0.05,
        gamma: 1.0,
        big_gamma: Some(DMatrix::identity(d, d) * 1e-2),
        batch: 16,
        holdout: 0,
        patience: 10,
        min_delta: 1e-9,
        max_epochs: 300,
        seed: 0,
        loss,
    }
}

/// `folds`-fold cross-validation: each fold standardizes on its training
/// rows, appends an intercept and trains both losses; metrics are on the
/// pooled out-of-fold scores, so every row is predicted exactly once.
pub fn loss_parity(name: &str, data: &Dataset, folds: usize, seed: u64) -> Result<Parity> {
    if folds < 2 || folds > data.n() {
        return Err(PipelineError::Config(format!("{folds} folds for {} rows", data.n())));
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut scores = [vec![0.0; data.n()], vec![0.0; data.n()]];
    let mut epochs = [0, 0];
    for f in 0..folds {
        let test_rows: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % folds == f).map(|(_, &i)| i).collect();
        let train_rows: Vec<usize> =
            order.iter().enumerate().filter(|(k, _)| k % folds != f).map(|(_, &i)| i).collect();
        let s = Standardizer::fit(&data.x, &train_rows)?;
        let mut x = data.x.clone();
        s.transform(&mut x);
        let full = Dataset::new(x.insert_column(data.d(), 1.0), data.y.clone())?;
        let train = full.select_rows(&train_rows)?;
        for (k, loss) in [LossKind::Taylor, LossKind::Logistic].into_iter().enumerate() {
            let out = train_sag(&train, &parity_config(full.d(), loss))?;
            for &i in &test_rows {
                scores[k][i] = full.row(i).dot(&out.theta);
            }
            epochs[k] += out.epochs;
        }
    }
    Ok(Parity {
        name: name.to_string(),
        taylor: score_metrics(&scores[0], &data.y)?,
        logistic: score_metrics(&scores[1], &data.y)?,
        epochs: (epochs[0], epochs[1]),
    })
}

/// The bundled iris-like table as virginica against the rest.
pub fn iris_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let t = Table::read(path)?;
    let features = t.header[..4].to_vec();
    Ok(t.to_dataset("species", &features, &LabelRule::OneVsRest("virginica".into()))?)
}

/// Cross-validation folds of [`parity_suite`].
pub const PARITY_FOLDS: usize = 5;

/// The three comparison datasets: the iris-like fixture, overlapping
/// Gaussian classes and a logistic-model sample.
pub fn parity_suite(iris: impl AsRef<Path>, seed: u64) -> Result<Vec<Parity>> {
    let sets = [
        ("iris_like", iris_dataset(iris)?),
        ("gaussian", gaussian_classes(1000, 6, 1.5, 0.4, seed)?),
        ("logistic", logistic_model(1000, 8, 2.5, 0.3, seed + 1)?.0),
    ];
    sets.iter().map(|(name, d)| loss_parity(name, d, PARITY_FOLDS, seed)).collect()
}
