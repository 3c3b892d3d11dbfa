// SPDX-License-Identifier: Apache-2.0

//! Stochastic average gradient over sequential mini-batches with hold-out
//! early stopping.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::data::{holdout_split, Dataset};
use crate::error::{LearnError, Result};
use crate::loss::{log1pexp, taylor_point, weighted_logistic_gradient_sum, weighted_taylor_gradient_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Taylor,
    Logistic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Learning rate.
    pub eta: f64,
    /// Ridge scale; the step adds `2γΓθ`, the gradient of `γθᵀΓθ`.
    pub gamma: f64,
    /// Ridge matrix; `None` is the identity.
    pub big_gamma: Option<DMatrix<f64>>,
    /// Mini-batch size.
    pub batch: usize,
    /// Hold-out rows used for early stopping; 0 stops on the training objective.
    pub holdout: usize,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    /// Improvement smaller than this does not count.
    pub min_delta: f64,
    pub max_epochs: usize,
    /// Seeds the hold-out sample.
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            gamma: 0.005,
            big_gamma: None,
            batch: 32,
            holdout: 0,
            patience: 5,
            min_delta: 1e-6,
            max_epochs: 100,
            seed: 0,
            loss: LossKind::Taylor,
        }
    }
}

impl TrainConfig {
    pub fn ridge_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match &self.big_gamma {
            None => Ok(DMatrix::identity(d, d)),
            Some(g) if g.nrows() == d && g.ncols() == d => Ok(g.clone()),
            Some(g) => Err(LearnError::Shape(format!("ridge matrix is {}x{}, expected {d}x{d}", g.nrows(), g.ncols()))),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.eta.is_nan() || self.eta <= 0.0 {
            return Err(LearnError::Config("eta must be positive".into()));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(LearnError::Config("gamma must be non-negative".into()));
        }
        if let Some(g) = &self.big_gamma {
            if (g - g.transpose()).amax() > 1e-12 {
                return Err(LearnError::Config("ridge matrix must be symmetric".into()));
            }
        }
        if self.holdout >= n {
            return Err(LearnError::Config(format!("hold-out {} leaves no training rows out of {n}", self.holdout)));
        }
        if self.batch == 0 || self.batch > n - self.holdout {
            return Err(LearnError::Config(format!("batch size {} must be in 1..={}", self.batch, n - self.holdout)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Ridge Taylor objective on the (weighted) training rows.
    pub train_taylor: f64,
    /// Taylor loss on the hold-out rows, `(1/h) Σ w_i [...]`.
    pub holdout_taylor: f64,
    pub holdout_logistic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput {
    pub theta: DVector<f64>,
    pub trace: Vec<EpochRecord>,
    pub holdout: Vec<usize>,
    pub epochs: usize,
    pub stopped_early: bool,
}

/// Consecutive batches over `n` rows; the last one may be short.
pub fn batch_ranges(n: usize, size: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(size)).map(|b| b * size..((b + 1) * size).min(n)).collect()
}

/// SAG memory: one stored mean gradient per batch and their weighted average
/// `Σ_b (s_b / n) g_b`.
#[derive(Clone, Debug)]
pub struct SagState {
    memory: Vec<DVector<f64>>,
    average: DVector<f64>,
    n_train: usize,
}

impl SagState {
    pub fn new(d: usize, n_batches: usize, n_train: usize) -> Self {
        SagState { memory: vec![DVector::zeros(d); n_batches], average: DVector::zeros(d), n_train }
    }

    /// Replaces batch `b`'s stored gradient by `grad` (a mean over `len` rows)
    /// and returns the updated average.
    pub fn update(&mut self, b: usize, grad: DVector<f64>, len: usize) -> &DVector<f64> {
        let share = len as f64 / self.n_train as f64;
        self.average.axpy(share, &(&grad - &self.memory[b]), 1.0);
        self.memory[b] = grad;
        &self.average
    }
}

/// `θ - η (g + γ (Γ + Γᵀ) θ)`.
pub fn ridge_step(
    theta: &DVector<f64>,
    grad: &DVector<f64>,
    eta: f64,
    gamma: f64,
    big_gamma: &DMatrix<f64>,
) -> DVector<f64> {
    let ridge = (big_gamma * theta + big_gamma.tr_mul(theta)) * gamma;
    theta - (grad + ridge) * eta
}

/// Early stopping on a loss that should decrease.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    best: f64,
    stale: usize,
    patience: usize,
    min_delta: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping { best: f64::INFINITY, stale: 0, patience, min_delta }
    }

    /// Records a loss; returns true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

/// Weighted Taylor and logistic losses over `rows`, normalized by `rows.len()`.
pub fn weighted_losses(theta: &DVector<f64>, data: &Dataset, weights: Option<&[f64]>, rows: &[usize]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let (mut tay, mut log) = (0.0, 0.0);
    for &i in rows {
        let w = weights.map_or(1.0, |w| w[i]);
        let z = data.x.row(i).transpose().dot(theta);
        tay += w * taylor_point(z, data.y[i]);
        log += w * log1pexp(-data.y[i] * z);
    }
    let h = rows.len() as f64;
    (tay / h, log / h)
}

pub fn train_sag(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_sag_weighted(data, None, cfg)
}

/// SAG with optional per-row weights (a 0/1 linkage mask or class weights).
///
/// Rows are split into hold-out and training sets with `holdout_split`; the
/// training rows are visited in order in batches of `cfg.batch`.
pub fn train_sag_weighted(data: &Dataset, weights: Option<&[f64]>, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate(data.n())?;
    if let Some(w) = weights {
        if w.len() != data.n() {
            return Err(LearnError::Shape(format!("{} weights for {} rows", w.len(), data.n())));
        }
    }
    let d = data.d();
    let big_gamma = cfg.ridge_matrix(d)?;
    let (holdout, train) = holdout_split(data.n(), cfg.holdout, cfg.seed)?;
    let batches = batch_ranges(train.len(), cfg.batch);
    let mut sag = SagState::new(d, batches.len(), train.len());
    let mut stop = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut theta = DVector::zeros(d);
    let mut trace = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        for (b, range) in batches.iter().enumerate() {
            let rows = &train[range.clone()];
            let sum = match cfg.loss {
                LossKind::Taylor => weighted_taylor_gradient_sum(&theta, data, weights, rows),
                LossKind::Logistic => weighted_logistic_gradient_sum(&theta, data, weights, rows),
            };
            let avg = sag.update(b, sum / rows.len() as f64, rows.len());
            theta = ridge_step(&theta, avg, cfg.eta, cfg.gamma, &big_gamma);
        }
        let (train_tay, _) = weighted_losses(&theta, data, weights, &train);
        let (hold_tay, hold_log) = weighted_losses(&theta, data, weights, &holdout);
        let record = EpochRecord {
            epoch: epoch + 1,
            train_taylor: train_tay + cfg.gamma * theta.dot(&(&big_gamma * &theta)),
            holdout_taylor: hold_tay,
            holdout_logistic: hold_log,
        };
        trace.push(record);
        let monitored = if holdout.is_empty() { record.train_taylor } else { record.holdout_taylor };
        if !monitored.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::Diverged { epoch: epoch + 1, trace });
        }
        if stop.observe(monitored) {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutput { theta, epochs: trace.len(), trace, holdout, stopped_early })
}

/// Writes `epoch,train_taylor,holdout_taylor,holdout_logistic` rows.
pub fn write_trace_csv<W: Write>(trace: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,train_taylor,holdout_taylor,holdout_logistic")?;
    for r in trace {
        writeln!(out, "{},{:e},{:e},{:e}", r.epoch, r.train_taylor, r.holdout_taylor, r.holdout_logistic)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{closed_form_minimizer, taylor_loss};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = (0..n)
            .map(|i| {
                let z: f64 = (0..d).map(|j| w[j] * x[(i, j)]).sum();
                if z + rng.gen_range(-0.5..0.5) > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Dataset::new(x, y).unwrap()
    }

    fn long_run(batch: usize) -> TrainConfig {
        TrainConfig { eta: 0.5, gamma: 0.01, batch, patience: usize::MAX, max_epochs: 4000, ..TrainConfig::default() }
    }

    #[test]
    fn batches_cover_rows() {
        assert_eq!(batch_ranges(10, 4), vec![0..4, 4..8, 8..10]);
        assert_eq!(batch_ranges(8, 4), vec![0..4, 4..8]);
    }

    #[test]
    fn zero_epochs_returns_zero_model() {
        let data = random_data(10, 3, 1);
        let out = train_sag(&data, &TrainConfig { max_epochs: 0, batch: 5, ..TrainConfig::default() }).unwrap();
        assert_eq!(out.theta, DVector::zeros(3));
        assert!(out.trace.is_empty());
    }

    #[test]
    fn converges_to_closed_form() {
        let data = random_data(20, 5, 2);
        let id = DMatrix::identity(5, 5);
        let star = closed_form_minimizer(&data, 0.01, &id).unwrap();
        for batch in [1, 5, 7, 20] {
            let out = train_sag(&data, &long_run(batch)).unwrap();
            assert!((&out.theta - &star).amax() < 1e-4, "batch {batch}");
            let gap =
                taylor_loss(&out.theta, &data, 0.01, &id).unwrap() - taylor_loss(&star, &data, 0.01, &id).unwrap();
            assert!(gap.abs() < 1e-6);
        }
    }

    #[test]
    fn weighted_run_equals_run_on_selected_rows() {
        // With a 0/1 mask the fixed point is the minimizer on the kept rows,
        // with the ridge scaled by the full training size.
        let data = random_data(30, 3, 3);
        let mask: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect();
        let out = train_sag_weighted(&data, Some(&mask), &long_run(6)).unwrap();
        let kept: Vec<usize> = (0..30).filter(|&i| mask[i] == 1.0).collect();
        let sub = data.select_rows(&kept).unwrap();
        let gamma_eff = 0.01 * 30.0 / 20.0;
        let star = closed_form_minimizer(&sub, gamma_eff, &DMatrix::identity(3, 3)).unwrap();
        assert!((&out.theta - &star).amax() < 1e-6);
    }

    #[test]
    fn early_stopping_and_holdout() {
        let data = random_data(200, 4, 4);
        let cfg = TrainConfig { holdout: 40, batch: 16, max_epochs: 500, ..TrainConfig::default() };
        let out = train_sag(&data, &cfg).unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.holdout.len(), 40);
        assert!(out.epochs < 500);
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let data = random_data(20, 3, 5);
        let cfg = TrainConfig { eta: 1e3, batch: 4, max_epochs: 2000, patience: usize::MAX, ..TrainConfig::default() };
        match train_sag(&data, &cfg) {
            Err(LearnError::Diverged { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs() {
        let data = random_data(10, 2, 6);
        assert!(train_sag(&data, &TrainConfig { eta: 0.0, batch: 2, ..TrainConfig::default() }).is_err());
        assert!(train_sag(&data, &TrainConfig { batch: 0, ..TrainConfig::default() }).is_err());
        assert!(train_sag(&data, &TrainConfig { batch: 2, holdout: 10, ..TrainConfig::default() }).is_err());
    }

    #[test]
    fn objective_trace_is_eventually_monotone() {
        for seed in 0..5 {
            let data = random_data(60, 4, 10 + seed);
            let cfg = TrainConfig {
                eta: 0.2,
                gamma: 0.05,
                batch: 8,
                holdout: 12,
                patience: usize::MAX,
                max_epochs: 300,
                ..TrainConfig::default()
            };
            let out = train_sag(&data, &cfg).unwrap();
            let tail = &out.trace[100..];
            for w in tail.windows(2) {
                assert!(w[1].train_taylor <= w[0].train_taylor + 1e-9);
            }
            // The hold-out trace settles: successive changes shrink to nothing.
            let last = tail.last().unwrap().holdout_taylor;
            assert!((tail[tail.len() - 2].holdout_taylor - last).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut buf = Vec::new();
        let rec = EpochRecord { epoch: 1, train_taylor: 0.5, holdout_taylor: 0.25, holdout_logistic: 0.125 };
        write_trace_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,train_taylor,holdout_taylor,holdout_logistic");
        assert_eq!(text.lines().count(), 2);
    }
}
