// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;
use vfl_he::HeError;
use vfl_learn::LearnError;

use crate::message::Kind;
use crate::party::PartyRole;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("encryption: {0}")]
    He(#[from] HeError),
    #[error("learning: {0}")]
    Learn(#[from] LearnError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected {expected:?} from {from:?}, got {got:?}")]
    Unexpected { from: PartyRole, expected: &'static str, got: Kind },
    #[error("sequence number {got} from {from:?} after {last:?}")]
    Sequence { from: PartyRole, got: u64, last: Option<u64> },
    #[error("session id {got:#x} does not match {expected:#x}")]
    Session { expected: u64, got: u64 },
    #[error("session aborted by {by:?}: {reason}")]
    Aborted { by: PartyRole, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("decrypted loss is not finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("batch leakage probability {probability:e} exceeds ceiling {ceiling:e}")]
    Leakage { probability: f64, ceiling: f64 },
    #[error("party thread panicked")]
    Panic,
}

impl From<std::io::Error> for ProtocolError {
    fn from(e: std::io::Error) -> Self {
        ProtocolError::Transport(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
