// SPDX-License-Identifier: Apache-2.0

//! Exact drift of the optimal ridge Taylor classifier along a sequence of
//! transpositions, computed by two Sherman-Morrison updates per step.
//!
//! With `V_t = (X̂_t X̂_tᵀ + bΓ)⁻¹` and `θ*_t = 2 V_t µ_t`, one transposition
//! changes the Gram matrix by `-a⁺b⁺ᵀ - b⁺a⁺ᵀ`, so `V_t = V_{t-1} + V_{t-1}
//! U_t V_{t-1}` and `θ*_{t+1} = (I + Λ_t) θ*_t + λ_t` with `Λ_t = V_t U_{t+1}`
//! and `λ_t = 2 V_{t+1} ε_t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TheoryError};
use crate::perm::PermutationFactorization;
use crate::problem::Problem;

/// Quantities attached to transposition `t` (1-based in the text, stored
/// at index `t - 1`).
#[derive(Clone, Debug)]
pub struct Step {
    pub u: usize,
    pub v: usize,
    /// Anchor difference `(x_u - x_v)_A`.
    pub a: DVector<f64>,
    /// Shuffle difference `(x̂_{t-1,u} - x̂_{t-1,v})_S` before the swap.
    pub b: DVector<f64>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `(1 - c1)² - c0 c2`.
    pub det: f64,
    pub u_mat: DMatrix<f64>,
    /// `Λ_{t-1} = V_{t-1} U_t`.
    pub big_lambda: DMatrix<f64>,
    /// `ε_{t-1} = µ_t - µ_{t-1}`.
    pub eps: DVector<f64>,
    /// `λ_{t-1} = 2 V_t ε_{t-1}`.
    pub small_lambda: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct Drift {
    /// `θ*_0 … θ*_T` from the recurrence.
    pub theta: Vec<DVector<f64>>,
    /// `V_0 … V_T` from the rank-two updates.
    pub v: Vec<DMatrix<f64>>,
    /// Mean operators `µ_0 … µ_T`.
    pub mu: Vec<DVector<f64>>,
    pub steps: Vec<Step>,
    /// Condition number of `X Xᵀ + bΓ` on the true data.
    pub condition: f64,
}

fn plus(v: &DVector<f64>, d: usize, offset: usize) -> DVector<f64> {
    let mut out = DVector::zeros(d);
    out.rows_mut(offset, v.len()).copy_from(v);
    out
}

/// `(1 - c1)² ∉ {0, c0 c2}`, up to rounding. With `γ > 0` and `Γ ≻ 0` both
/// `V_{t-1}` and `V_t` are positive definite and the determinant identity
/// `det V_t⁻¹ = det V_{t-1}⁻¹ · ((1 - c1)² - c0 c2)` forces this to hold.
pub fn invertible(c0: f64, c1: f64, c2: f64) -> bool {
    let one = (1.0 - c1) * (1.0 - c1);
    let scale = one.max((c0 * c2).abs()).max(1.0);
    one > 1e-14 * scale && (one - c0 * c2).abs() > 1e-14 * scale
}

/// Runs the recurrence. Errors with the offending step when
/// `(1 - c_{1,t})² ∈ {0, c_{0,t} c_{2,t}}`.
pub fn drift_recurrence(problem: &Problem, fac: &PermutationFactorization) -> Result<Drift> {
    let (d, da) = (problem.d(), problem.d_anchor());
    let ds = d - da;
    let mut hat = problem.x().clone();
    let v0 = problem.inverse(&hat)?;
    let mu0 = problem.mean_operator(&hat);
    let mut theta = vec![&v0 * &mu0 * 2.0];
    let mut v = vec![v0];
    let mut mu = vec![mu0];
    let mut steps = Vec::with_capacity(fac.t());
    for (k, &(u, w)) in fac.transpositions().iter().enumerate() {
        let t = k + 1;
        let a = hat.view((0, u), (da, 1)).into_owned().column(0) - hat.view((0, w), (da, 1)).column(0);
        let b = hat.view((da, u), (ds, 1)).column(0) - hat.view((da, w), (ds, 1)).column(0);
        let (ap, bp) = (plus(&a, d, 0), plus(&b, d, da));
        let prev = &v[k];
        let c0 = ap.dot(&(prev * &ap));
        let c1 = ap.dot(&(prev * &bp));
        let c2 = bp.dot(&(prev * &bp));
        if !invertible(c0, c1, c2) {
            return Err(TheoryError::NotInvertible { t, lhs: (1.0 - c1) * (1.0 - c1), rhs: c0 * c2 });
        }
        let det = (1.0 - c1) * (1.0 - c1) - c0 * c2;
        let mut u_mat = DMatrix::zeros(d, d);
        u_mat.view_mut((0, 0), (da, da)).copy_from(&(&a * a.transpose() * c2));
        u_mat.view_mut((0, da), (da, ds)).copy_from(&(&a * b.transpose() * (1.0 - c1)));
        u_mat.view_mut((da, 0), (ds, da)).copy_from(&(&b * a.transpose() * (1.0 - c1)));
        u_mat.view_mut((da, da), (ds, ds)).copy_from(&(&b * b.transpose() * c0));
        u_mat /= det;
        let next_v = prev + prev * &u_mat * prev;
        let big_lambda = prev * &u_mat;
        for r in da..d {
            hat.swap((r, u), (r, w));
        }
        let next_mu = problem.mean_operator(&hat);
        let eps = &next_mu - &mu[k];
        let small_lambda = &next_v * &eps * 2.0;
        let next_theta = &theta[k] + &big_lambda * &theta[k] + &small_lambda;
        steps.push(Step { u, v: w, a, b, c0, c1, c2, det, u_mat, big_lambda, eps, small_lambda });
        theta.push(next_theta);
        v.push(next_v);
        mu.push(next_mu);
    }
    Ok(Drift { theta, v, mu, steps, condition: problem.condition_number(problem.x()) })
}

impl Drift {
    pub fn t(&self) -> usize {
        self.steps.len()
    }

    /// `H_{i,j} = (I + Λ_{i-1}) ⋯ (I + Λ_j)`, the identity when `i = j`.
    pub fn h(&self, i: usize, j: usize) -> DMatrix<f64> {
        assert!(j <= i && i <= self.t(), "need j <= i <= T");
        let d = self.theta[0].len();
        let mut out = DMatrix::identity(d, d);
        for k in j..i {
            out = (DMatrix::identity(d, d) + &self.steps[k].big_lambda) * out;
        }
        out
    }

    /// `θ*_T - θ*_0 = (H_{T,0} - I) θ*_0 + Σ_t H_{T,t+1} λ_t`.
    pub fn unravelled_drift(&self) -> DVector<f64> {
        let t = self.t();
        let d = self.theta[0].len();
        let mut out = (self.h(t, 0) - DMatrix::identity(d, d)) * &self.theta[0];
        for k in 0..t {
            out += self.h(t, k + 1) * &self.steps[k].small_lambda;
        }
        out
    }

    /// Final drift `θ*_T - θ*_0`.
    pub fn drift(&self) -> DVector<f64> {
        &self.theta[self.t()] - &self.theta[0]
    }
}

/// Direct solves `θ*_t = 2 (X̂_t X̂_tᵀ + bΓ)⁻¹ µ_t` for every prefix.
pub fn direct_minimizers(problem: &Problem, fac: &PermutationFactorization) -> Result<Vec<DVector<f64>>> {
    (0..=fac.t()).map(|t| problem.minimizer(&problem.permuted(fac, t))).collect()
}

/// Largest elementwise relative gap between consecutive recurrence and
/// direct-solve classifiers, normalized by each direct classifier's norm.
pub fn recurrence_error(drift: &Drift, direct: &[DVector<f64>]) -> f64 {
    drift.theta.iter().zip(direct).map(|(r, s)| (r - s).amax() / s.amax().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}
