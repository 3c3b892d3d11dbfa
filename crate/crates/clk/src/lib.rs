// SPDX-License-Identifier: Apache-2.0

//! Privacy-preserving record linkage: cryptographic longterm keys (keyed
//! Bloom filters over identifier n-grams), Dice similarity and greedy
//! one-to-one matching into aligned permutations plus a match mask.

mod clk;
mod error;
mod matching;

pub use clk::{build_clk, dice, keyed_hashes, ngrams, normalize, Clk, ClkConfig, Record};
pub use error::{ClkError, Result};
pub use matching::{candidates, encrypt_mask, greedy_select, match_clks, Candidate, Linkage};
