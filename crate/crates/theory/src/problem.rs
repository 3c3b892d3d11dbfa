// SPDX-License-Identifier: Apache-2.0

//! A ridge Taylor learning problem over a vertically split observation
//! matrix. Observations are the columns of `x` (d × n); the first
//! `d_anchor` rows are the anchor features held with the labels, the rest
//! are the shuffle features whose columns entity resolution may permute.

use nalgebra::{DMatrix, DVector};
use vfl_learn::{taylor_loss, Dataset};

use crate::error::{Result, TheoryError};
use crate::perm::PermutationFactorization;

#[derive(Clone, Debug)]
pub struct Problem {
    x: DMatrix<f64>,
    y: Vec<f64>,
    d_anchor: usize,
    gamma: f64,
    big_gamma: DMatrix<f64>,
}

impl Problem {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, d_anchor: usize, gamma: f64, big_gamma: DMatrix<f64>) -> Result<Self> {
        let (d, n) = x.shape();
        if n == 0 || d == 0 {
            return Err(TheoryError::Problem("empty observation matrix".into()));
        }
        if y.len() != n {
            return Err(TheoryError::Problem(format!("{} labels for {n} observations", y.len())));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(TheoryError::Problem("labels must be +1 or -1".into()));
        }
        if d_anchor == 0 || d_anchor >= d {
            return Err(TheoryError::Problem(format!("anchor block of {d_anchor} features out of {d}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TheoryError::Problem("non-finite feature value".into()));
        }
        let p = Problem { x, y, d_anchor, gamma, big_gamma };
        p.check_ridge()?;
        Ok(p)
    }

    fn check_ridge(&self) -> Result<()> {
        let d = self.d();
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(TheoryError::Problem(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.big_gamma.shape() != (d, d) {
            return Err(TheoryError::Problem(format!("ridge matrix must be {d}x{d}")));
        }
        if (&self.big_gamma - self.big_gamma.transpose()).amax() > 1e-12 * self.big_gamma.amax() {
            return Err(TheoryError::Problem("ridge matrix must be symmetric".into()));
        }
        if self.big_gamma.clone().cholesky().is_none() {
            return Err(TheoryError::NotPositiveDefinite);
        }
        Ok(())
    }

    /// Same data with a different ridge strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let p = Problem { gamma, ..self.clone() };
        p.check_ridge()?;
        Ok(p)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn d_anchor(&self) -> usize {
        self.d_anchor
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn big_gamma(&self) -> &DMatrix<f64> {
        &self.big_gamma
    }

    /// `b = 8 n γ`.
    pub fn ridge_b(&self) -> f64 {
        8.0 * self.n() as f64 * self.gamma
    }

    /// Largest observation norm `X_*`.
    pub fn x_star(&self) -> f64 {
        self.x.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Smallest and largest eigenvalues of `Γ`.
    pub fn gamma_spectrum(&self) -> (f64, f64) {
        let eig = self.big_gamma.clone().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }

    /// Observation matrix after the first `t` transpositions of `fac`.
    pub fn permuted(&self, fac: &PermutationFactorization, t: usize) -> DMatrix<f64> {
        let mut x = self.x.clone();
        for &(u, v) in &fac.transpositions()[..t] {
            for r in self.d_anchor..self.d() {
                x.swap((r, u), (r, v));
            }
        }
        x
    }

    /// `Σ_i y_i x_i` over the columns of `x`. Each coordinate is summed in
    /// sorted order, so the result depends only on the multiset of terms.
    pub fn mean_operator(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(x.nrows(), |r, _| {
            let mut terms: Vec<f64> = (0..x.ncols()).map(|i| self.y[i] * x[(r, i)]).collect();
            terms.sort_by(f64::total_cmp);
            terms.iter().sum()
        })
    }

    /// `X Xᵀ + b Γ`.
    pub fn system(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * x.transpose() + &self.big_gamma * self.ridge_b()
    }

    /// `(X Xᵀ + b Γ)⁻¹` by Cholesky.
    pub fn inverse(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.system(x).cholesky().map(|c| c.inverse()).ok_or(TheoryError::NotPositiveDefinite)
    }

    /// Optimal classifier `2 (X Xᵀ + bΓ)⁻¹ µ` for the observations `x`.
    pub fn minimizer(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let chol = self.system(x).cholesky().ok_or(TheoryError::NotPositiveDefinite)?;
        Ok(chol.solve(&(self.mean_operator(x) * 2.0)))
    }

    /// Observations as a row-major learning dataset.
    pub fn dataset(&self, x: &DMatrix<f64>) -> Result<Dataset> {
        Ok(Dataset::new(x.transpose(), self.y.clone())?)
    }

    /// Ridge Taylor loss of `theta` on the true (unpermuted) data.
    pub fn true_loss(&self, theta: &DVector<f64>) -> Result<f64> {
        Ok(taylor_loss(theta, &self.dataset(&self.x)?, self.gamma, &self.big_gamma)?)
    }

    /// Spectral condition number of `X Xᵀ + bΓ`.
    pub fn condition_number(&self, x: &DMatrix<f64>) -> f64 {
        let eig = self.system(x).symmetric_eigen().eigenvalues;
        eig.max() / eig.min()
    }
}
