// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::sag::EpochRecord;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear system is singular or not positive definite")]
    Singular,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Vec<EpochRecord> },
    #[error("AUC is undefined for a single-class test set")]
    SingleClass,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LearnError>;
