// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;
use vfl_learn::LearnError;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("infeasible permutation request: {0}")]
    Infeasible(String),
    #[error("invertibility fails at step {t}: (1 - c1)^2 = {lhs:e}, c0 c2 = {rhs:e}")]
    NotInvertible { t: usize, lhs: f64, rhs: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("learning: {0}")]
    Learn(#[from] LearnError),
}

pub type Result<T> = std::result::Result<T, TheoryError>;
