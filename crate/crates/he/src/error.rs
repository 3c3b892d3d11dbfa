// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeError {
    #[error("key size {bits} bits is below the minimum of {min} bits")]
    KeyTooSmall { bits: u64, min: u64 },
    #[error("prime generation failed after {attempts} candidates")]
    PrimeGeneration { attempts: usize },
    #[error("plaintext out of range for modulus")]
    PlaintextRange,
    #[error("operands were produced under different public keys")]
    KeyMismatch,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("ciphertext is not an element of the ciphertext group")]
    InvalidCiphertext,
    #[error("cannot encode {0}: value is not finite")]
    NotFinite(f64),
    #[error("cannot encode {0}: subnormal values are not supported")]
    Subnormal(f64),
    #[error("significand lies in the reserved overflow band")]
    Overflow,
    #[error("exponent gap of {gap} digits does not fit in the plaintext space")]
    ExponentGap { gap: u64 },
    #[error("decoded value is outside the binary64 range")]
    Unrepresentable,
    #[error("base must be a power of two between 2 and 2^16, got {0}")]
    InvalidBase(u64),
    #[error("operands use different encoding bases")]
    BaseMismatch,
    #[error("malformed wire data: {0}")]
    Wire(&'static str),
}

pub type Result<T> = std::result::Result<T, HeError>;
