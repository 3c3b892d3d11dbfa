// SPDX-License-Identifier: Apache-2.0

//! Plaintext logistic and Taylor-loss learning: losses, gradients, the SAG
//! optimizer, standardization and evaluation metrics.
//!
//! ```
//! use nalgebra::DMatrix;
//! use vfl_learn::{closed_form_minimizer, taylor_loss, Dataset};
//!
//! let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, -1.0, -2.0]);
//! let data = Dataset::new(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
//! let id = DMatrix::identity(1, 1);
//! let theta = closed_form_minimizer(&data, 0.01, &id).unwrap();
//! assert!(theta[0] > 0.0);
//! assert!(taylor_loss(&theta, &data, 0.01, &id).unwrap() < std::f64::consts::LN_2);
//! ```

mod data;
mod error;
mod loss;
mod metrics;
mod sag;
pub mod synth;

pub use data::{balance_subsample, balance_weights, holdout_split, hstack, Dataset, LabelRule, Standardizer, Table};
pub use error::{LearnError, Result};
pub use loss::{
    closed_form_minimizer, log1pexp, logistic_loss, logistic_minimizer, mean_operator, mean_operator_normalized,
    ridge_taylor_gradient, sigmoid, taylor_gradient, taylor_loss, taylor_point, weighted_logistic_gradient_sum,
    weighted_taylor_gradient_sum,
};
pub use metrics::{auc, evaluate, score_metrics, Metrics};
pub use sag::{
    batch_ranges, ridge_step, train_sag, train_sag_weighted, weighted_losses, write_trace_csv, EarlyStopping,
    EpochRecord, LossKind, SagState, TrainConfig, TrainOutput,
};
