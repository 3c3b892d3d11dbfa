// SPDX-License-Identifier: Apache-2.0

//! Smallest `(ε, τ)` for which every elementary permutation keeps its errors
//! within `|eᵀw| ≤ ε · max_j |r_jᵀw| + τ ‖w‖` for all directions `w`.
//!
//! For fixed `ε` the worst direction has a closed form by duality:
//! `sup_{‖w‖ ≤ 1} |eᵀw| - ε max_j |r_jᵀw| = min_{‖λ‖₁ ≤ ε} ‖e - Σ λ_j r_j‖`,
//! so the required `τ` is exact and the sweep over `ε` is one-dimensional.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::perm::PermutationFactorization;
use crate::problem::Problem;

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyEstimate {
    pub epsilon: f64,
    pub tau: f64,
    /// `ξ = ε + τ / X_*`.
    pub xi: f64,
    pub x_star: f64,
    /// Number of inequalities the estimate covers.
    pub constraints: usize,
}

/// One inequality: an error vector and the observations bounding it.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub error: DVector<f64>,
    pub refs: Vec<DVector<f64>>,
}

fn pad(x: &DMatrix<f64>, col: usize, rows: std::ops::Range<usize>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |r, _| if rows.contains(&r) { x[(r, col)] } else { 0.0 })
}

/// All inequalities of `(ε, τ)`-accuracy for every step of `fac`: the
/// cumulative error of every observation after each step, and the anchor
/// and shuffle differences of the two observations each step touches.
pub fn constraints(problem: &Problem, fac: &PermutationFactorization) -> Vec<Constraint> {
    let x = problem.x();
    let (d, da) = (problem.d(), problem.d_anchor());
    let mut out = Vec::new();
    let mut hat = x.clone();
    let mut owner: Vec<usize> = (0..problem.n()).collect();
    for &(u, v) in fac.transpositions() {
        for r in da..d {
            hat.swap((r, u), (r, v));
        }
        owner.swap(u, v);
        for (i, &o) in owner.iter().enumerate() {
            if o != i {
                let e = pad(&hat, i, da..d) - pad(x, i, da..d);
                if e.iter().any(|&v| v != 0.0) {
                    out.push(Constraint { error: e, refs: vec![x.column(i).into_owned()] });
                }
            }
        }
        let a = pad(x, u, 0..da) - pad(x, v, 0..da);
        out.push(Constraint { error: a, refs: vec![x.column(u).into_owned(), x.column(v).into_owned()] });
        let (ub, vb) = (owner[u], owner[v]);
        let b = pad(x, ub, da..d) - pad(x, vb, da..d);
        out.push(Constraint { error: b, refs: vec![x.column(ub).into_owned(), x.column(vb).into_owned()] });
    }
    out
}

/// `min_{|λ| ≤ ε} ‖e - λ r‖`.
fn residual_one(e: &DVector<f64>, r: &DVector<f64>, eps: f64) -> f64 {
    let rr = r.norm_squared();
    let lambda = if rr > 0.0 { (e.dot(r) / rr).clamp(-eps, eps) } else { 0.0 };
    (e - r * lambda).norm()
}

/// `min_{|λ₁| + |λ₂| ≤ ε} ‖e - λ₁ p - λ₂ q‖`.
fn residual_two(e: &DVector<f64>, p: &DVector<f64>, q: &DVector<f64>, eps: f64) -> f64 {
    let eval = |l1: f64, l2: f64| (e - p * l1 - q * l2).norm();
    let (pp, pq, qq) = (p.dot(p), p.dot(q), q.dot(q));
    let (pe, qe) = (p.dot(e), q.dot(e));
    let det = pp * qq - pq * pq;
    if det > 1e-12 * pp * qq {
        let l1 = (qq * pe - pq * qe) / det;
        let l2 = (pp * qe - pq * pe) / det;
        if l1.abs() + l2.abs() <= eps {
            return eval(l1, l2);
        }
    }
    // Otherwise the minimum lies on an edge of the ℓ1 ball: λ = ε (s σ₁, (1-s) σ₂).
    let mut best = f64::INFINITY;
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let start = q * (s2 * eps);
            let dir = p * (s1 * eps) - &start;
            let dd = dir.norm_squared();
            let s = if dd > 0.0 { ((e - &start).dot(&dir) / dd).clamp(0.0, 1.0) } else { 0.0 };
            best = best.min(eval(s * s1 * eps, (1.0 - s) * s2 * eps));
        }
    }
    best
}

/// Smallest `τ ≥ 0` meeting one inequality for every direction at this `ε`.
pub fn required_tau(c: &Constraint, eps: f64) -> f64 {
    match c.refs.as_slice() {
        [r] => residual_one(&c.error, r, eps),
        [p, q] => residual_two(&c.error, p, q, eps),
        _ => unreachable!("constraints have one or two references"),
    }
}

fn tau_at(cs: &[Constraint], eps: f64) -> f64 {
    cs.iter().map(|c| required_tau(c, eps)).fold(0.0, f64::max)
}

/// Pareto sweep minimizing `ξ(ε) = ε + τ(ε)/X_*` over `ε ∈ [0, 1]`. `τ(ε)`
/// is a supremum of affine functions of `ε`, so `ξ` is convex and a
/// golden-section search finds its minimum.
pub fn estimate_accuracy(problem: &Problem, fac: &PermutationFactorization) -> AccuracyEstimate {
    let cs = constraints(problem, fac);
    let x_star = problem.x_star();
    let xi = |eps: f64| eps + tau_at(&cs, eps) / x_star;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if !cs.is_empty() {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut m1, mut m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (xi(m1), xi(m2));
        for _ in 0..80 {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - g * (hi - lo);
                f1 = xi(m1);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + g * (hi - lo);
                f2 = xi(m2);
            }
        }
    }
    let mut epsilon = if cs.is_empty() { 0.0 } else { (lo + hi) / 2.0 };
    for candidate in [0.0, 1.0] {
        if xi(candidate) <= xi(epsilon) {
            epsilon = candidate;
        }
    }
    let tau = tau_at(&cs, epsilon);
    AccuracyEstimate { epsilon, tau, xi: epsilon + tau / x_star, x_star, constraints: cs.len() }
}

/// Outcome of testing an estimate on random directions.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionCheck {
    pub directions: usize,
    /// Largest `|eᵀw| - ε max |rᵀw| - τ` seen; non-positive means no violation.
    pub worst_slack: f64,
    pub refuted: bool,
}

/// Tests the inequalities on `count` uniform unit directions. A finite
/// sample can only refute accuracy, never certify it.
pub fn check_directions(
    problem: &Problem,
    fac: &PermutationFactorization,
    est: &AccuracyEstimate,
    count: usize,
    seed: u64,
) -> DirectionCheck {
    let cs = constraints(problem, fac);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = problem.d();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let w = random_unit(d, &mut rng);
        for c in &cs {
            let bound = c.refs.iter().map(|r| r.dot(&w).abs()).fold(0.0, f64::max);
            worst = worst.max(c.error.dot(&w).abs() - est.epsilon * bound - est.tau);
        }
    }
    let tol = 1e-12 * est.x_star.max(1.0);
    DirectionCheck { directions: count, worst_slack: worst, refuted: worst > tol }
}

pub(crate) fn random_unit(d: usize, rng: &mut ChaCha20Rng) -> DVector<f64> {
    loop {
        let w = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let norm: f64 = w.norm();
        if norm > 1e-12 {
            return w / norm;
        }
    }
}
