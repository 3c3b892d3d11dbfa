// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;
use vfl_clk::ClkError;
use vfl_he::HeError;
use vfl_learn::LearnError;
use vfl_protocol::ProtocolError;
use vfl_theory::TheoryError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("encryption: {0}")]
    He(#[from] HeError),
    #[error("linkage: {0}")]
    Clk(#[from] ClkError),
    #[error("learning: {0}")]
    Learn(#[from] LearnError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("theory: {0}")]
    Theory(#[from] TheoryError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
