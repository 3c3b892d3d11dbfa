// SPDX-License-Identifier: Apache-2.0

//! Additively homomorphic encryption (Paillier, g = n + 1) with an exact
//! floating-point encoding layer.
//!
//! ```
//! use vfl_he::{encoding, keygen_insecure, Base};
//!
//! let (pk, sk) = keygen_insecure(256).unwrap();
//! let a = encoding::encrypt_f64(&pk, 1.5, Base::DEFAULT).unwrap();
//! let b = encoding::encrypt_f64(&pk, 2.25, Base::DEFAULT).unwrap();
//! let sum = encoding::add_encrypted(&pk, &a, &b).unwrap();
//! assert_eq!(encoding::decrypt_f64(&sk, &sum).unwrap(), 3.75);
//! ```

pub mod encoding;
mod error;
mod modexp;
mod paillier;
pub mod prime;
pub mod wire;

pub use encoding::{Base, EncodedNumber, EncryptedNumber};
pub use error::{HeError, Result};
pub use paillier::{
    keygen, keygen_insecure, keygen_insecure_with_rng, keygen_with_rng, Ciphertext, PrivateKey, PublicKey,
    MIN_INSECURE_BITS, MIN_SECURE_BITS,
};
