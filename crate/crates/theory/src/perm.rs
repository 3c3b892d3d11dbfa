// SPDX-License-Identifier: Apache-2.0

//! Permutations of the shuffle block factored into transpositions.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Result, TheoryError};

/// `P_* = P_1 P_2 … P_T` where `P_t` swaps the shuffle parts of columns
/// `u_t` and `v_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationFactorization {
    n: usize,
    transpositions: Vec<(usize, usize)>,
    class_mismatch: Vec<bool>,
}

impl PermutationFactorization {
    pub fn new(transpositions: Vec<(usize, usize)>, y: &[f64]) -> Result<Self> {
        let n = y.len();
        for &(u, v) in &transpositions {
            if u >= n || v >= n || u == v {
                return Err(TheoryError::Problem(format!("transposition ({u}, {v}) invalid for n = {n}")));
            }
        }
        let class_mismatch = transpositions.iter().map(|&(u, v)| y[u] != y[v]).collect();
        Ok(PermutationFactorization { n, transpositions, class_mismatch })
    }

    pub fn identity(y: &[f64]) -> Self {
        PermutationFactorization { n: y.len(), transpositions: Vec::new(), class_mismatch: Vec::new() }
    }

    /// Factors the permutation whose column `j` receives the shuffle part of
    /// observation `owner[j]`, using at most `n - 1` transpositions.
    pub fn from_owners(owner: &[usize], y: &[f64]) -> Result<Self> {
        let n = owner.len();
        if n != y.len() {
            return Err(TheoryError::Problem("owner map and labels differ in length".into()));
        }
        let mut seen = vec![false; n];
        for &o in owner {
            if o >= n || std::mem::replace(&mut seen[o], true) {
                return Err(TheoryError::Problem("owner map is not a permutation".into()));
            }
        }
        let mut cur: Vec<usize> = (0..n).collect();
        let mut pos: Vec<usize> = (0..n).collect();
        let mut steps = Vec::new();
        for j in 0..n {
            if cur[j] != owner[j] {
                let k = pos[owner[j]];
                steps.push((j, k));
                cur.swap(j, k);
                pos[cur[j]] = j;
                pos[cur[k]] = k;
            }
        }
        Self::new(steps, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn transpositions(&self) -> &[(usize, usize)] {
        &self.transpositions
    }

    pub fn class_mismatch(&self) -> &[bool] {
        &self.class_mismatch
    }

    /// Number of elementary permutations `T`.
    pub fn t(&self) -> usize {
        self.transpositions.len()
    }

    /// Number of class-mismatch transpositions `T_+`.
    pub fn t_plus(&self) -> usize {
        self.class_mismatch.iter().filter(|&&m| m).count()
    }

    /// `ρ = T_+ / T`, zero for the identity.
    pub fn rho(&self) -> f64 {
        if self.transpositions.is_empty() {
            0.0
        } else {
            self.t_plus() as f64 / self.t() as f64
        }
    }

    /// The first `t` transpositions.
    pub fn prefix(&self, t: usize) -> Self {
        PermutationFactorization {
            n: self.n,
            transpositions: self.transpositions[..t].to_vec(),
            class_mismatch: self.class_mismatch[..t].to_vec(),
        }
    }

    /// After the first `t` transpositions, column `j` holds the shuffle part
    /// of observation `owners(t)[j]`.
    pub fn owners(&self, t: usize) -> Vec<usize> {
        let mut owner: Vec<usize> = (0..self.n).collect();
        for &(u, v) in &self.transpositions[..t] {
            owner.swap(u, v);
        }
        owner
    }

    /// Permutation matrix `P_*` with `X̂_S = X_S P_*`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let owner = self.owners(self.t());
        DMatrix::from_fn(self.n, self.n, |r, c| if owner[c] == r { 1.0 } else { 0.0 })
    }
}

/// Draws `t` transpositions of which `round(rho_target · t)` swap columns
/// with different labels. Pairs use fresh indices while any remain.
pub fn random_permutation(y: &[f64], t: usize, rho_target: f64, seed: u64) -> Result<PermutationFactorization> {
    let n = y.len();
    if t > n {
        return Err(TheoryError::Infeasible(format!("T = {t} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&rho_target) {
        return Err(TheoryError::Infeasible(format!("rho = {rho_target} outside [0, 1]")));
    }
    let mismatches = (rho_target * t as f64).round() as usize;
    let within = t - mismatches;
    let pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| y[i] <= 0.0).collect();
    if mismatches > 0 && (pos.is_empty() || neg.is_empty()) {
        return Err(TheoryError::Infeasible("class-mismatch swaps need both classes".into()));
    }
    if within > 0 && pos.len() < 2 && neg.len() < 2 {
        return Err(TheoryError::Infeasible("within-class swaps need a class with two members".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut kinds: Vec<bool> = (0..t).map(|k| k < mismatches).collect();
    kinds.shuffle(&mut rng);
    let mut used = vec![false; n];
    let pick = |rng: &mut ChaCha20Rng, from: &[usize], other: Option<usize>, used: &mut [bool]| -> usize {
        let fresh: Vec<usize> = from.iter().copied().filter(|&i| !used[i] && Some(i) != other).collect();
        let i = if fresh.is_empty() {
            let any: Vec<usize> = from.iter().copied().filter(|&i| Some(i) != other).collect();
            any[rng.gen_range(0..any.len())]
        } else {
            fresh[rng.gen_range(0..fresh.len())]
        };
        used[i] = true;
        i
    };
    let mut steps = Vec::with_capacity(t);
    for mismatch in kinds {
        let (u, v) = if mismatch {
            let u = pick(&mut rng, &pos, None, &mut used);
            let v = pick(&mut rng, &neg, None, &mut used);
            if rng.gen::<bool>() {
                (u, v)
            } else {
                (v, u)
            }
        } else {
            let weight = |c: &[usize]| if c.len() < 2 { 0.0 } else { (c.len() * (c.len() - 1)) as f64 };
            let p_pos = weight(&pos) / (weight(&pos) + weight(&neg));
            let class = if rng.gen::<f64>() < p_pos { &pos } else { &neg };
            let u = pick(&mut rng, class, None, &mut used);
            let v = pick(&mut rng, class, Some(u), &mut used);
            (u, v)
        };
        steps.push((u, v));
    }
    PermutationFactorization::new(steps, y)
}
