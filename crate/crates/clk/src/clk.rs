// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{ClkError, Result};

/// Identifier record: field name to raw value.
pub type Record = HashMap<String, String>;

#[derive(Clone, PartialEq, Eq)]
pub struct ClkConfig {
    /// Filter length in bits.
    pub l: usize,
    /// Hash functions per n-gram.
    pub k: usize,
    /// n-gram size.
    pub n: usize,
    /// Identifier fields hashed into the filter, in order.
    pub fields: Vec<String>,
    /// Secret shared by the data providers for the keyed hashes.
    pub secret: String,
}

impl fmt::Debug for ClkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClkConfig")
            .field("l", &self.l)
            .field("k", &self.k)
            .field("n", &self.n)
            .field("fields", &self.fields)
            .finish_non_exhaustive()
    }
}

impl ClkConfig {
    /// 1024-bit filters, 20 hashes per bigram.
    pub fn new(fields: Vec<String>, secret: impl Into<String>) -> Self {
        ClkConfig { l: 1024, k: 20, n: 2, fields, secret: secret.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.k == 0 || self.n == 0 {
            return Err(ClkError::Config("l, k and n must all be positive".into()));
        }
        Ok(())
    }

    /// `key = value` lines under the `clk.` prefix.
    pub fn to_kv(&self) -> String {
        format!(
            "clk.l = {}\nclk.k = {}\nclk.ngram = {}\nclk.fields = {}\nclk.secret = {}\n",
            self.l,
            self.k,
            self.n,
            self.fields.join(","),
            self.secret
        )
    }

    /// Reads the `clk.*` keys from a parsed key-value map; absent keys keep
    /// their defaults, `clk.fields` and `clk.secret` are required.
    pub fn from_kv(map: &HashMap<String, String>) -> Result<Self> {
        let fields = map
            .get("clk.fields")
            .ok_or_else(|| ClkError::Config("missing clk.fields".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let secret = map.get("clk.secret").ok_or_else(|| ClkError::Config("missing clk.secret".into()))?;
        let mut cfg = ClkConfig::new(fields, secret.clone());
        let num = |key: &str, default: usize| -> Result<usize> {
            map.get(key).map_or(Ok(default), |v| {
                v.trim().parse().map_err(|_| ClkError::Config(format!("{key}: not an integer")))
            })
        };
        cfg.l = num("clk.l", cfg.l)?;
        cfg.k = num("clk.k", cfg.k)?;
        cfg.n = num("clk.ngram", cfg.n)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Bloom-filter bit vector over hashed identifier n-grams.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Clk {
    words: Vec<u64>,
    len: usize,
    popcount: u32,
}

impl fmt::Debug for Clk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Clk(len={}, popcount={})", self.len, self.popcount)
    }
}

impl Clk {
    pub fn zeros(len: usize) -> Self {
        Clk { words: vec![0; len.div_ceil(64)], len, popcount: 0 }
    }

    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut clk = Clk::zeros(len);
        for p in positions {
            clk.set(p);
        }
        clk
    }

    fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range");
        let (w, b) = (i / 64, i % 64);
        if self.words[w] & (1 << b) == 0 {
            self.words[w] |= 1 << b;
            self.popcount += 1;
        }
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn popcount(&self) -> u32 {
        self.popcount
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn and_count(&self, other: &Clk) -> u32 {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum()
    }

    /// Length as 4-byte big-endian, then the bits MSB-first in ceil(l/8) bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u32).to_be_bytes());
        for byte in 0..self.len.div_ceil(8) {
            let mut v = 0u8;
            for bit in 0..8 {
                if self.get(byte * 8 + bit) {
                    v |= 0x80 >> bit;
                }
            }
            out.push(v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header: [u8; 4] = bytes.get(..4).and_then(|h| h.try_into().ok()).ok_or(ClkError::Wire("missing length"))?;
        let len = u32::from_be_bytes(header) as usize;
        let body = &bytes[4..];
        if body.len() != len.div_ceil(8) {
            return Err(ClkError::Wire("body length does not match bit length"));
        }
        let mut clk = Clk::zeros(len);
        for (byte, v) in body.iter().enumerate() {
            for bit in 0..8 {
                if v & (0x80 >> bit) != 0 {
                    let i = byte * 8 + bit;
                    if i >= len {
                        return Err(ClkError::Wire("padding bits must be zero"));
                    }
                    clk.set(i);
                }
            }
        }
        Ok(clk)
    }
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// n-grams of a normalized value padded with `_` on both sides; empty values
/// yield none.
pub fn ngrams(value: &str, n: usize) -> Vec<String> {
    let norm = normalize(value);
    if norm.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = std::iter::once('_').chain(norm.chars()).chain(std::iter::once('_')).collect();
    if chars.len() < n {
        return vec![chars.iter().collect()];
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// The two keyed 64-bit hashes of an n-gram of `field`.
pub fn keyed_hashes(secret: &str, field: &str, gram: &str) -> (u64, u64) {
    let mut h = Sha256::new();
    for part in [secret, field, gram] {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part.as_bytes());
    }
    let d = h.finalize();
    let h1 = u64::from_be_bytes(d[0..8].try_into().expect("digest is 32 bytes"));
    let h2 = u64::from_be_bytes(d[8..16].try_into().expect("digest is 32 bytes"));
    (h1, h2)
}

/// Builds the CLK of a record: for every n-gram of every configured field,
/// sets bits `(H1 + i * H2) mod l` for `i = 0..k`.
pub fn build_clk(record: &Record, cfg: &ClkConfig) -> Clk {
    let mut clk = Clk::zeros(cfg.l);
    let l = cfg.l as u64;
    for field in &cfg.fields {
        let Some(value) = record.get(field) else { continue };
        for gram in ngrams(value, cfg.n) {
            let (h1, h2) = keyed_hashes(&cfg.secret, field, &gram);
            for i in 0..cfg.k as u64 {
                clk.set((h1.wrapping_add(i.wrapping_mul(h2)) % l) as usize);
            }
        }
    }
    clk
}

/// Dice coefficient `2 |a & b| / (|a| + |b|)`; two empty filters score 0.
pub fn dice(a: &Clk, b: &Clk) -> Result<f64> {
    if a.len != b.len {
        return Err(ClkError::LengthMismatch(a.len, b.len));
    }
    Ok(dice_unchecked(a, b))
}

pub(crate) fn dice_unchecked(a: &Clk, b: &Clk) -> f64 {
    let total = a.popcount + b.popcount;
    if total == 0 {
        return 0.0;
    }
    2.0 * f64::from(a.and_count(b)) / f64::from(total)
}
