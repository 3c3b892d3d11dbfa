// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use vfl_he::{encoding, Base, EncryptedNumber, PublicKey};

use crate::clk::{dice_unchecked, Clk};
use crate::error::{ClkError, Result};

/// Output of entity resolution: row `sigma[i]` of A is aligned with row
/// `tau[i]` of B, and `mask[i]` says whether that alignment is a match.
#[derive(Clone, Debug, PartialEq)]
pub struct Linkage {
    pub sigma: Vec<usize>,
    pub tau: Vec<usize>,
    pub mask: Vec<bool>,
    pub scores: Vec<f64>,
}

impl Linkage {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn matches(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Mask as 0/1 floats.
    pub fn mask_f64(&self) -> Vec<f64> {
        self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }
}

/// Candidate pair above threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub score: f64,
    pub a: usize,
    pub b: usize,
}

/// All pairs with score at least `threshold`, sorted by descending score and
/// then by `(a, b)`. Scoring runs in parallel over rows of `a`.
pub fn candidates(a: &[Clk], b: &[Clk], threshold: f64) -> Result<Vec<Candidate>> {
    let len = a.first().or(b.first()).map_or(0, Clk::len);
    if let Some(bad) = a.iter().chain(b).find(|c| c.len() != len) {
        return Err(ClkError::LengthMismatch(len, bad.len()));
    }
    let mut out: Vec<Candidate> = a
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, ca)| {
            b.iter().enumerate().filter_map(move |(j, cb)| {
                let score = dice_unchecked(ca, cb);
                (score >= threshold).then_some(Candidate { score, a: i, b: j })
            })
        })
        .collect();
    out.par_sort_unstable_by(|x, y| y.score.total_cmp(&x.score).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
    Ok(out)
}

/// Greedy one-to-one selection from a sorted candidate list.
pub fn greedy_select(cands: &[Candidate], n_a: usize, n_b: usize) -> Vec<Candidate> {
    let mut used_a = vec![false; n_a];
    let mut used_b = vec![false; n_b];
    let mut out = Vec::new();
    for c in cands {
        if !used_a[c.a] && !used_b[c.b] {
            used_a[c.a] = true;
            used_b[c.b] = true;
            out.push(*c);
        }
    }
    out
}

/// Greedy Dice matching followed by a seeded random alignment.
///
/// The result has length `min(|a|, |b|)`. Every selected pair shares one
/// position with mask 1; the remaining positions pair the shorter side's
/// unmatched rows with a random subset of the longer side's unmatched rows, so
/// truncation drops only rows without a match.
pub fn match_clks(a: &[Clk], b: &[Clk], threshold: f64, seed: u64) -> Result<Linkage> {
    if a.is_empty() || b.is_empty() {
        return Err(ClkError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ClkError::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    let cands = candidates(a, b, threshold)?;
    let selected = greedy_select(&cands, a.len(), b.len());
    let n = a.len().min(b.len());

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut matched_a = vec![false; a.len()];
    let mut matched_b = vec![false; b.len()];
    for c in &selected {
        matched_a[c.a] = true;
        matched_b[c.b] = true;
    }
    let mut free_a: Vec<usize> = (0..a.len()).filter(|&i| !matched_a[i]).collect();
    let mut free_b: Vec<usize> = (0..b.len()).filter(|&j| !matched_b[j]).collect();
    free_a.shuffle(&mut rng);
    free_b.shuffle(&mut rng);
    let fill = n - selected.len();
    free_a.truncate(fill);
    free_b.truncate(fill);

    let mut rows: Vec<(usize, usize, bool)> = selected
        .iter()
        .map(|c| (c.a, c.b, true))
        .chain(free_a.into_iter().zip(free_b).map(|(i, j)| (i, j, false)))
        .collect();
    rows.shuffle(&mut rng);

    let mut link = Linkage {
        sigma: Vec::with_capacity(n),
        tau: Vec::with_capacity(n),
        mask: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
    };
    for (i, j, m) in rows {
        link.sigma.push(i);
        link.tau.push(j);
        link.mask.push(m);
        link.scores.push(dice_unchecked(&a[i], &b[j]));
    }
    Ok(link)
}

/// Encrypts mask bits as integers at the fixed exponent 0, each with fresh
/// randomness.
pub fn encrypt_mask(mask: &[bool], pk: &PublicKey, base: Base) -> Result<Vec<EncryptedNumber>> {
    let zero = encoding::encode_integer(0, pk, base)?;
    let one = encoding::encode_integer(1, pk, base)?;
    mask.par_iter().map(|&m| encoding::encrypt(pk, if m { &one } else { &zero }).map_err(ClkError::from)).collect()
}
