// SPDX-License-Identifier: Apache-2.0

//! Logistic loss, its second-order Taylor expansion around 0, gradients and
//! closed-form / Newton minimizers of the ridge-regularized objectives.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{LearnError, Result};

/// `log(1 + e^z)` without overflow.
pub fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-example Taylor loss `log 2 - yz/2 + z^2/8` at margin input `z = θ·x`.
pub fn taylor_point(z: f64, y: f64) -> f64 {
    LN_2 - 0.5 * y * z + 0.125 * z * z
}

fn check_dims(theta: &DVector<f64>, data: &Dataset) -> Result<()> {
    if theta.len() != data.d() {
        return Err(LearnError::Shape(format!("model has {} weights, data {} features", theta.len(), data.d())));
    }
    Ok(())
}

/// `(1/n) Σ log(1 + exp(-y_i θ·x_i))`.
pub fn logistic_loss(theta: &DVector<f64>, data: &Dataset) -> Result<f64> {
    check_dims(theta, data)?;
    let z = &data.x * theta;
    Ok(z.iter().zip(&data.y).map(|(z, y)| log1pexp(-y * z)).sum::<f64>() / data.n() as f64)
}

/// `(1/n) Σ [log 2 - y θ·x/2 + (θ·x)^2/8] + γ θᵀΓθ`.
pub fn taylor_loss(theta: &DVector<f64>, data: &Dataset, gamma: f64, big_gamma: &DMatrix<f64>) -> Result<f64> {
    check_dims(theta, data)?;
    let z = &data.x * theta;
    let avg = z.iter().zip(&data.y).map(|(&z, &y)| taylor_point(z, y)).sum::<f64>() / data.n() as f64;
    Ok(avg + gamma * theta.dot(&(big_gamma * theta)))
}

/// Ridge-free Taylor gradient over a batch: `(1/s') Σ (θ·x/4 - y/2) x`.
pub fn taylor_gradient(theta: &DVector<f64>, data: &Dataset, rows: &[usize]) -> Result<DVector<f64>> {
    check_dims(theta, data)?;
    if rows.is_empty() {
        return Err(LearnError::Data("empty batch".into()));
    }
    let mut g = weighted_taylor_gradient_sum(theta, data, None, rows);
    g /= rows.len() as f64;
    Ok(g)
}

/// Unscaled `Σ_{i ∈ rows} w_i (θ·x_i/4 - y_i/2) x_i`; `w = None` means all ones.
pub fn weighted_taylor_gradient_sum(
    theta: &DVector<f64>,
    data: &Dataset,
    weights: Option<&[f64]>,
    rows: &[usize],
) -> DVector<f64> {
    let mut g = DVector::zeros(data.d());
    for &i in rows {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let xi = data.x.row(i);
        let coef = w * (0.25 * xi.dot(&theta.transpose()) - 0.5 * data.y[i]);
        g.axpy(coef, &xi.transpose(), 1.0);
    }
    g
}

/// Unscaled `Σ_{i ∈ rows} w_i ∇ log(1 + exp(-y_i θ·x_i))`.
pub fn weighted_logistic_gradient_sum(
    theta: &DVector<f64>,
    data: &Dataset,
    weights: Option<&[f64]>,
    rows: &[usize],
) -> DVector<f64> {
    let mut g = DVector::zeros(data.d());
    for &i in rows {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let xi = data.x.row(i);
        let y = data.y[i];
        let coef = -w * y * sigmoid(-y * xi.dot(&theta.transpose()));
        g.axpy(coef, &xi.transpose(), 1.0);
    }
    g
}

/// Gradient of the full ridge Taylor objective `taylor_loss(·, data, γ, Γ)`.
pub fn ridge_taylor_gradient(
    theta: &DVector<f64>,
    data: &Dataset,
    gamma: f64,
    big_gamma: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let rows: Vec<usize> = (0..data.n()).collect();
    let sym = big_gamma + big_gamma.transpose();
    Ok(taylor_gradient(theta, data, &rows)? + gamma * (sym * theta))
}

/// Mean operator `Σ y_i x_i` (unnormalized).
pub fn mean_operator(data: &Dataset) -> DVector<f64> {
    data.x.tr_mul(&DVector::from_column_slice(&data.y))
}

/// Hold-out mean operator `(1/h) Σ_{i ∈ rows} w_i y_i x_i`.
pub fn mean_operator_normalized(data: &Dataset, weights: Option<&[f64]>, rows: &[usize]) -> DVector<f64> {
    let mut mu = DVector::zeros(data.d());
    for &i in rows {
        let w = weights.map_or(1.0, |w| w[i]);
        mu.axpy(w * data.y[i], &data.x.row(i).transpose(), 1.0);
    }
    if !rows.is_empty() {
        mu /= rows.len() as f64;
    }
    mu
}

/// Exact minimizer of the ridge Taylor objective:
/// `θ* = 2 (XᵀX + 8nγΓ)⁻¹ Σ y_i x_i`, solved by Cholesky.
pub fn closed_form_minimizer(data: &Dataset, gamma: f64, big_gamma: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = data.n() as f64;
    let a = data.x.tr_mul(&data.x) + big_gamma * (8.0 * n * gamma);
    let chol = a.cholesky().ok_or(LearnError::Singular)?;
    Ok(chol.solve(&(mean_operator(data) * 2.0)))
}

/// Minimizer of `(1/n) Σ log(1 + exp(-y θ·x)) + γ θᵀΓθ` by damped Newton steps.
pub fn logistic_minimizer(data: &Dataset, gamma: f64, big_gamma: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = data.n() as f64;
    let sym = big_gamma + big_gamma.transpose();
    let objective = |t: &DVector<f64>| -> Result<f64> { Ok(logistic_loss(t, data)? + gamma * t.dot(&(big_gamma * t))) };
    let mut theta = DVector::zeros(data.d());
    let mut f = objective(&theta)?;
    for _ in 0..100 {
        let z = &data.x * &theta;
        let mut grad = &sym * &theta * gamma;
        let mut hess = &sym * gamma;
        for i in 0..data.n() {
            let y = data.y[i];
            let p = sigmoid(-y * z[i]);
            let xi = data.x.row(i).transpose();
            grad.axpy(-y * p / n, &xi, 1.0);
            hess.ger(p * (1.0 - p) / n, &xi, &xi, 1.0);
        }
        if grad.norm() < 1e-12 {
            break;
        }
        let step = hess.cholesky().ok_or(LearnError::Singular)?.solve(&grad);
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            let fc = objective(&cand)?;
            if fc <= f - 1e-4 * t * grad.dot(&step) || t < 1e-10 {
                theta = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let y = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        Dataset::new(x, y).unwrap()
    }

    fn random_theta(d: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn zero_model_gives_log_two() {
        let data = random_data(10, 3, 1);
        let t = DVector::zeros(3);
        assert!((logistic_loss(&t, &data).unwrap() - LN_2).abs() < 1e-15);
        assert!((taylor_loss(&t, &data, 0.3, &DMatrix::identity(3, 3)).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_asymptote_and_stability() {
        let data = Dataset::new(DMatrix::from_row_slice(1, 1, &[1.0]), vec![1.0]).unwrap();
        let big = DVector::from_element(1, 1e4);
        assert!(logistic_loss(&big, &data).unwrap() < 1e-300);
        assert!((logistic_loss(&(-big), &data).unwrap() - 1e4).abs() < 1e-9);
    }

    #[test]
    fn losses_match_naive_formulas() {
        let data = random_data(15, 4, 2);
        let t = random_theta(4, 3);
        let g = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let mut naive_log = 0.0;
        let mut naive_tay = 0.0;
        for i in 0..15 {
            let z: f64 = (0..4).map(|j| t[j] * data.x[(i, j)]).sum();
            naive_log += (1.0 + (-data.y[i] * z).exp()).ln();
            naive_tay += 2f64.ln() - 0.5 * data.y[i] * z + z * z / 8.0;
        }
        let mut ridge = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                ridge += t[i] * g[(i, j)] * t[j];
            }
        }
        assert!((logistic_loss(&t, &data).unwrap() - naive_log / 15.0).abs() < 1e-12);
        let tl = taylor_loss(&t, &data, 0.07, &g).unwrap();
        assert!((tl - (naive_tay / 15.0 + 0.07 * ridge)).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_zero_is_linear_term() {
        let data = random_data(12, 3, 4);
        let rows: Vec<usize> = (0..12).collect();
        let g = taylor_gradient(&DVector::zeros(3), &data, &rows).unwrap();
        let expected = mean_operator(&data) * (-0.5 / 12.0);
        assert!((g - expected).amax() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            let data = random_data(20, 5, seed);
            let t = random_theta(5, seed + 100);
            let rows: Vec<usize> = (0..20).collect();
            let g = taylor_gradient(&t, &data, &rows).unwrap();
            let id = DMatrix::identity(5, 5);
            let h = 1e-6;
            for j in 0..5 {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[j] += h;
                tm[j] -= h;
                let fd = (taylor_loss(&tp, &data, 0.0, &id).unwrap() - taylor_loss(&tm, &data, 0.0, &id).unwrap())
                    / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6, "seed {seed} coord {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn unit_vector_batch_is_sparse() {
        let mut x = DMatrix::zeros(1, 4);
        x[(0, 2)] = 1.0;
        let data = Dataset::new(x, vec![1.0]).unwrap();
        let g = taylor_gradient(&random_theta(4, 1), &data, &[0]).unwrap();
        for j in [0, 1, 3] {
            assert_eq!(g[j], 0.0);
        }
        assert_ne!(g[2], 0.0);
    }

    #[test]
    fn closed_form_is_stationary() {
        for seed in 0..10 {
            let data = random_data(30, 6, seed);
            let g = DMatrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else { 0.3 });
            let gamma = 0.01 * (seed + 1) as f64;
            let t = closed_form_minimizer(&data, gamma, &g).unwrap();
            assert!(ridge_taylor_gradient(&t, &data, gamma, &g).unwrap().norm() <= 1e-8);
        }
    }

    #[test]
    fn zero_mean_operator_gives_zero_model() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, -3.0, 0.5, -3.0, 0.5]);
        let data = Dataset::new(x, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let t = closed_form_minimizer(&data, 0.1, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(t.amax(), 0.0);
    }

    #[test]
    fn regularization_shrinks_monotonically() {
        let data = random_data(25, 4, 9);
        let id = DMatrix::identity(4, 4);
        let mut prev = f64::INFINITY;
        for k in -4..6 {
            let norm = closed_form_minimizer(&data, 10f64.powi(k), &id).unwrap().norm();
            assert!(norm < prev);
            prev = norm;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn logistic_minimizer_is_stationary() {
        let data = random_data(40, 3, 5);
        let id = DMatrix::identity(3, 3);
        let t = logistic_minimizer(&data, 0.01, &id).unwrap();
        let rows: Vec<usize> = (0..40).collect();
        let g = weighted_logistic_gradient_sum(&t, &data, None, &rows) / 40.0 + &t * 0.02;
        assert!(g.norm() < 1e-10);
    }

    proptest! {
        #[test]
        fn taylor_dominates_logistic(z in -50.0f64..50.0) {
            for y in [-1.0, 1.0] {
                prop_assert!(taylor_point(z, y) >= log1pexp(-y * z) - 1e-12);
            }
        }

        #[test]
        fn taylor_loss_dominates_on_random_models(seed in 0u64..1000) {
            let data = random_data(10, 3, seed);
            let t = random_theta(3, seed ^ 0xabc);
            let tay = taylor_loss(&t, &data, 0.0, &DMatrix::identity(3, 3)).unwrap();
            prop_assert!(tay >= logistic_loss(&t, &data).unwrap() - 1e-12);
        }
    }
}
