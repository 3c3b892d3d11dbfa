// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;
use vfl_he::HeError;

#[derive(Debug, Error)]
pub enum ClkError {
    #[error("CLK lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed CLK bytes: {0}")]
    Wire(&'static str),
    #[error("matching needs two nonempty inputs")]
    EmptyInput,
    #[error(transparent)]
    Encryption(#[from] HeError),
}

pub type Result<T> = std::result::Result<T, ClkError>;
