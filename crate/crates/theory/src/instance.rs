// SPDX-License-Identifier: Apache-2.0

//! Seeded instance generators: unconstrained random problems for the
//! recurrence, and calibrated near-duplicate problems for the bounds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::accuracy::{estimate_accuracy, AccuracyEstimate};
use crate::bounds::{calibrating_gamma, direction_sample, CheckConfig};
use crate::error::{Result, TheoryError};
use crate::perm::{random_permutation, PermutationFactorization};
use crate::problem::Problem;

/// The `α` values swept by the bound checks.
pub const ALPHA_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn gaussian(d: usize, n: usize, scale: f64, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d, n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Labels from a random linear rule with 10% flips; both classes appear.
fn labels(x: &DMatrix<f64>, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let (d, n) = x.shape();
    let w = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let s = if x.column(i).dot(&w) >= 0.0 { 1.0 } else { -1.0 };
            if rng.gen::<f64>() < 0.1 {
                -s
            } else {
                s
            }
        })
        .collect();
    if y.iter().all(|&v| v == y[0]) {
        y[0] = -y[0];
    }
    y
}

/// Random diagonal ridge matrix with entries in `[0.5, 2]`.
fn ridge(d: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.gen_range(0.5..2.0)))
}

/// Random problem and factorization with `n ≤ 50`, `d ≤ 10`, `T ≤ 10`,
/// `γ` log-uniform in `[1e-3, 1]`.
pub fn random_instance(seed: u64) -> Result<(Problem, PermutationFactorization)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=50);
    let d = rng.gen_range(2..=10);
    let da = rng.gen_range(1..d);
    let x = gaussian(d, n, 1.0, &mut rng);
    let y = labels(&x, &mut rng);
    let gamma = 10f64.powf(rng.gen_range(-3.0..0.0));
    let problem = Problem::new(x, y, da, gamma, ridge(d, &mut rng))?;
    let t = rng.gen_range(0..=10.min(n));
    let fac = random_permutation(problem.y(), t, rng.gen_range(0.0..=1.0), rng.gen())?;
    Ok((problem, fac))
}

/// Parameters of a calibrated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub d_anchor: usize,
    /// Requested transpositions before the `α`-bounded truncation.
    pub t: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Relative size of the difference between swapped observations.
    pub noise: f64,
    pub seed: u64,
}

impl InstanceSpec {
    /// Draws a spec from `seed`: `n ∈ [50, 400]`, `d ∈ [2, 10]`, `T ≤ 10`,
    /// `ρ ∈ {0, ½, 1}`, `α` from the grid.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = rng.gen_range(2..=10);
        InstanceSpec {
            n: rng.gen_range(50..=400),
            d,
            d_anchor: rng.gen_range(1..d),
            t: rng.gen_range(1..=10),
            rho: [0.0, 0.5, 1.0][rng.gen_range(0..3)],
            alpha: ALPHA_GRID[rng.gen_range(0..ALPHA_GRID.len())],
            noise: 10f64.powf(rng.gen_range(-3.0..-1.0)),
            seed: rng.gen(),
        }
    }
}

/// A problem whose factorization passes the `α`-boundedness check and whose
/// ridge strength is the smallest meeting the calibration ratio.
#[derive(Clone, Debug)]
pub struct Constructed {
    pub spec: InstanceSpec,
    pub problem: Problem,
    pub fac: PermutationFactorization,
    pub accuracy: AccuracyEstimate,
}

/// Builds a calibrated instance. Each transposition swaps an observation
/// with a near duplicate of it (an entity-resolution confusion between
/// similar records); the factorization is then truncated to the longest
/// prefix within `T ≤ (n/ξ)^{(1-α)/2}` and `γ` is set to the smallest value
/// meeting the calibration ratio.
pub fn construct_instance(spec: &InstanceSpec, cfg: &CheckConfig) -> Result<Constructed> {
    if spec.d < 2 || spec.d_anchor == 0 || spec.d_anchor >= spec.d {
        return Err(TheoryError::Problem("need 1 <= d_anchor < d".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let scale = 1.0 / (spec.d as f64).sqrt();
    let mut x = gaussian(spec.d, spec.n, scale, &mut rng);
    let y = labels(&x, &mut rng);
    let full = random_permutation(&y, spec.t, spec.rho, rng.gen())?;
    for &(u, v) in full.transpositions() {
        let jitter = gaussian(spec.d, 1, scale * spec.noise, &mut rng);
        let near = x.column(u) + jitter.column(0);
        x.set_column(v, &near);
    }
    let big_gamma = ridge(spec.d, &mut rng);
    let base = Problem::new(x, y, spec.d_anchor, 1.0, big_gamma)?;
    let mut fac = full;
    let mut accuracy = estimate_accuracy(&base, &fac);
    loop {
        let limit = (spec.n as f64 / accuracy.xi).powf((1.0 - spec.alpha) / 2.0);
        if fac.t() as f64 <= limit {
            break;
        }
        fac = fac.prefix((limit.floor() as usize).min(fac.t() - 1));
        accuracy = estimate_accuracy(&base, &fac);
    }
    let dirs = direction_sample(base.x(), cfg.directions, cfg.seed ^ 0x5eed);
    let problem = base.with_gamma(calibrating_gamma(&base, &accuracy, &dirs))?;
    Ok(Constructed { spec: spec.clone(), problem, fac, accuracy })
}
