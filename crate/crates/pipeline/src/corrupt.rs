// SPDX-License-Identifier: Apache-2.0

//! Missing values and single-character typos in identifier fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vfl_clk::Record;

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// One substitution, adjacent transposition or deletion, chosen uniformly.
/// Every edit changes the value; a transposition without two distinct
/// neighbours falls back to a substitution.
pub fn typo(value: &str, rng: &mut impl Rng) -> String {
    let mut chars: Vec<char> = value.chars().collect();
    if chars.is_empty() {
        return String::new();
    }
    let substitute = |chars: &mut Vec<char>, rng: &mut dyn rand::RngCore| {
        let i = rng.gen_range(0..chars.len());
        loop {
            let c = char::from(ALPHABET[rng.gen_range(0..ALPHABET.len())]);
            if c != chars[i] {
                chars[i] = c;
                break;
            }
        }
    };
    match rng.gen_range(0..3) {
        0 => substitute(&mut chars, rng),
        1 => {
            let spots: Vec<usize> = (0..chars.len().saturating_sub(1)).filter(|&i| chars[i] != chars[i + 1]).collect();
            if spots.is_empty() {
                substitute(&mut chars, rng);
            } else {
                let i = spots[rng.gen_range(0..spots.len())];
                chars.swap(i, i + 1);
            }
        }
        _ => {
            chars.remove(rng.gen_range(0..chars.len()));
        }
    }
    chars.into_iter().collect()
}

/// Independently per field (in sorted field order): with `missing_rate` the
/// value is emptied, otherwise with `typo_rate` one typo is applied.
pub fn corrupt_pi(records: &[Record], typo_rate: f64, missing_rate: f64, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            let mut keys: Vec<&String> = r.keys().collect();
            keys.sort();
            keys.into_iter()
                .map(|k| {
                    let v = &r[k];
                    let out = if rng.gen_bool(missing_rate) {
                        String::new()
                    } else if rng.gen_bool(typo_rate) {
                        typo(v, &mut rng)
                    } else {
                        v.clone()
                    };
                    (k.clone(), out)
                })
                .collect()
        })
        .collect()
}
