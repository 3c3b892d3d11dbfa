// SPDX-License-Identifier: Apache-2.0

//! Assumption checks and the drift, immunity, loss-gap and generalization
//! bounds, evaluated against direct solves.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::accuracy::{check_directions, estimate_accuracy, random_unit, AccuracyEstimate, DirectionCheck};
use crate::error::{Result, TheoryError};
use crate::perm::PermutationFactorization;
use crate::problem::Problem;
use crate::recurrence::{direct_minimizers, drift_recurrence, recurrence_error, Drift};
use crate::report::{flag, num, verdict, Report};

/// Direction sampling used for suprema and infima over unit vectors.
#[derive(Clone, Copy, Debug)]
pub struct CheckConfig {
    pub directions: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { directions: 10_000, seed: 0 }
    }
}

/// Uniform unit vectors plus the left singular directions of `x`.
pub fn direction_sample(x: &DMatrix<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut dirs: Vec<DVector<f64>> = (0..count).map(|_| random_unit(x.nrows(), &mut rng)).collect();
    if let Some(u) = x.clone().svd(true, false).u {
        dirs.extend(u.column_iter().map(|c| c.into_owned()));
    }
    dirs
}

/// Population variance of the stretches `|x_iᵀw|` along unit `w`.
pub fn stretch_variance(x: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let s: Vec<f64> = x.column_iter().map(|c| c.dot(w).abs()).collect();
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Smallest stretch variance over the direction sample.
pub fn stretch_variance_inf(x: &DMatrix<f64>, dirs: &[DVector<f64>]) -> f64 {
    dirs.iter().map(|w| stretch_variance(x, w)).fold(f64::INFINITY, f64::min)
}

/// Data-model calibration: the max-norm/variance ratio and `n ≥ 4ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub x_star: f64,
    pub variance_inf: f64,
    pub directions: usize,
    pub gamma_lambda_min: f64,
    /// `X_*² / ((1 - ε)²/8 · inf σ² + γ λ_min(Γ))`, must be ≤ 1.
    pub ratio: f64,
    pub ratio_ok: bool,
    pub n: usize,
    pub xi: f64,
    pub size_ok: bool,
}

impl Calibration {
    pub fn holds(&self) -> bool {
        self.ratio_ok && self.size_ok
    }
}

pub fn calibration(problem: &Problem, est: &AccuracyEstimate, dirs: &[DVector<f64>]) -> Calibration {
    let x_star = problem.x_star();
    let variance_inf = stretch_variance_inf(problem.x(), dirs);
    let gamma_lambda_min = problem.gamma() * problem.gamma_spectrum().0;
    let denom = (1.0 - est.epsilon).powi(2) / 8.0 * variance_inf + gamma_lambda_min;
    let ratio = x_star * x_star / denom;
    let n = problem.n();
    Calibration {
        x_star,
        variance_inf,
        directions: dirs.len(),
        gamma_lambda_min,
        ratio,
        ratio_ok: ratio <= 1.0,
        n,
        xi: est.xi,
        size_ok: n as f64 >= 4.0 * est.xi,
    }
}

/// Smallest `γ` meeting the max-norm/variance condition for this data and
/// accuracy estimate.
pub fn calibrating_gamma(problem: &Problem, est: &AccuracyEstimate, dirs: &[DVector<f64>]) -> f64 {
    let x_star = problem.x_star();
    let variance = (1.0 - est.epsilon).powi(2) / 8.0 * stretch_variance_inf(problem.x(), dirs);
    let lambda_min = problem.gamma_spectrum().0;
    let need = (x_star * x_star - variance).max(1e-12 * x_star * x_star);
    let mut gamma = need / lambda_min;
    // Step up by ulps until the evaluated ratio is at most one.
    while x_star * x_star / (variance + gamma * lambda_min) > 1.0 {
        gamma = f64::from_bits(gamma.to_bits() + 1);
    }
    gamma
}

/// Every assumption with its evaluated quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Assumptions {
    pub accuracy: AccuracyEstimate,
    pub directions: DirectionCheck,
    pub calibration: Calibration,
    pub alpha: f64,
    /// `(n/ξ)^{(1-α)/2}`.
    pub size_limit: f64,
    pub t: usize,
    pub alpha_ok: bool,
}

impl Assumptions {
    pub fn holds(&self) -> bool {
        !self.directions.refuted && self.calibration.holds() && self.alpha_ok
    }

    /// `C(n) = (ξ/n)^α`.
    pub fn c_n(&self) -> f64 {
        c_of_n(self.accuracy.xi, self.calibration.n as f64, self.alpha)
    }
}

pub fn assess(problem: &Problem, fac: &PermutationFactorization, alpha: f64, cfg: &CheckConfig) -> Result<Assumptions> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(TheoryError::Problem(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let accuracy = estimate_accuracy(problem, fac);
    let directions = check_directions(problem, fac, &accuracy, cfg.directions, cfg.seed);
    let dirs = direction_sample(problem.x(), cfg.directions, cfg.seed ^ 0x5eed);
    let calibration = calibration(problem, &accuracy, &dirs);
    let size_limit = (problem.n() as f64 / accuracy.xi).powf((1.0 - alpha) / 2.0);
    Ok(Assumptions {
        alpha_ok: fac.t() as f64 <= size_limit,
        accuracy,
        directions,
        calibration,
        alpha,
        size_limit,
        t: fac.t(),
    })
}

fn assumption_fields(a: &Assumptions) -> Vec<(String, String)> {
    vec![
        ("epsilon".into(), num(a.accuracy.epsilon)),
        ("tau".into(), num(a.accuracy.tau)),
        ("xi".into(), num(a.accuracy.xi)),
        ("x_star".into(), num(a.accuracy.x_star)),
        ("accuracy_directions".into(), a.directions.directions.to_string()),
        ("accuracy_worst_slack".into(), num(a.directions.worst_slack)),
        ("accuracy".into(), if a.directions.refuted { "refuted" } else { "not-refuted" }.into()),
        ("variance_inf".into(), num(a.calibration.variance_inf)),
        ("variance_directions".into(), a.calibration.directions.to_string()),
        ("calibration_ratio".into(), num(a.calibration.ratio)),
        ("calibration_ratio_check".into(), flag(a.calibration.ratio_ok)),
        ("calibration_size_check".into(), flag(a.calibration.size_ok)),
        ("alpha".into(), a.alpha.to_string()),
        ("size_limit".into(), num(a.size_limit)),
        ("alpha_bounded".into(), flag(a.alpha_ok)),
        ("assumptions".into(), flag(a.holds())),
    ]
}

/// The three key parameters plus `C(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundTerms {
    /// `‖θ*_0‖ X_*`.
    pub delta_m: f64,
    /// `√ξ ρ / 4`.
    pub delta_rho: f64,
    /// `‖Σ y_i x_i‖ / (n X_*)`.
    pub delta_mu: f64,
    /// `(ξ/n)^α`.
    pub c_n: f64,
    pub alpha: f64,
}

impl BoundTerms {
    /// `δ̄ = (δ_m + δ_ρ)/2`.
    pub fn delta_bar(&self) -> f64 {
        (self.delta_m + self.delta_rho) / 2.0
    }
}

/// `C(n) = (ξ/n)^α`.
pub fn c_of_n(xi: f64, n: f64, alpha: f64) -> f64 {
    (xi / n).powf(alpha)
}

/// `U(n) = δ̄ (δ_µ + 6 δ̄ + 4L/√n) C(n)`.
pub fn u_of_n(delta_bar: f64, delta_mu: f64, lipschitz: f64, n: f64, c_n: f64) -> f64 {
    delta_bar * (delta_mu + 6.0 * delta_bar + 4.0 * lipschitz / n.sqrt()) * c_n
}

pub fn bound_terms(problem: &Problem, theta0: &DVector<f64>, xi: f64, rho: f64, alpha: f64) -> BoundTerms {
    let x_star = problem.x_star();
    let n = problem.n() as f64;
    BoundTerms {
        delta_m: theta0.norm() * x_star,
        delta_rho: xi.sqrt() * rho / 4.0,
        delta_mu: problem.mean_operator(problem.x()).norm() / (n * x_star),
        c_n: c_of_n(xi, n, alpha),
        alpha,
    }
}

fn term_fields(t: &BoundTerms) -> Vec<(String, String)> {
    vec![
        ("delta_m".into(), num(t.delta_m)),
        ("delta_rho".into(), num(t.delta_rho)),
        ("delta_mu".into(), num(t.delta_mu)),
        ("c_n".into(), num(t.c_n)),
    ]
}

/// Exactness of the recurrence against direct solves.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceReport {
    pub n: usize,
    pub d: usize,
    pub t: usize,
    /// Largest relative gap between recurrence and direct classifiers.
    pub theta_error: f64,
    /// Largest relative gap between updated and recomputed `V_t`.
    pub v_error: f64,
    /// Gap between the unravelled sum and the stepwise drift.
    pub unravel_error: f64,
    pub condition: f64,
    pub c_max: f64,
}

impl RecurrenceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.theta_error <= tol && self.v_error <= tol
    }
}

fn max_c(drift: &Drift) -> f64 {
    drift.steps.iter().flat_map(|s| [s.c0, s.c1, s.c2]).fold(0.0, f64::max)
}

pub fn check_recurrence(problem: &Problem, fac: &PermutationFactorization) -> Result<RecurrenceReport> {
    let drift = drift_recurrence(problem, fac)?;
    let direct = direct_minimizers(problem, fac)?;
    let mut v_error = 0.0f64;
    for t in 0..=fac.t() {
        let v = problem.inverse(&problem.permuted(fac, t))?;
        v_error = v_error.max((&drift.v[t] - &v).amax() / v.amax());
    }
    let scale = drift.theta.iter().map(|t| t.amax()).fold(f64::MIN_POSITIVE, f64::max);
    Ok(RecurrenceReport {
        n: problem.n(),
        d: problem.d(),
        t: fac.t(),
        theta_error: recurrence_error(&drift, &direct),
        v_error,
        unravel_error: (drift.unravelled_drift() - drift.drift()).amax() / scale,
        condition: drift.condition,
        c_max: max_c(&drift),
    })
}

impl Report for RecurrenceReport {
    fn fields(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.n.to_string()),
            ("d".into(), self.d.to_string()),
            ("T".into(), self.t.to_string()),
            ("theta_rel_error".into(), num(self.theta_error)),
            ("v_rel_error".into(), num(self.v_error)),
            ("unravel_rel_error".into(), num(self.unravel_error)),
            ("condition_number".into(), num(self.condition)),
            ("c_max".into(), num(self.c_max)),
        ]
    }
}

/// Relative drift bound `‖θ*_T - θ*_0‖/‖θ*_0‖ ≤ (ξ/n) T² (1 + √ξ ρ/(4‖θ*_0‖X_*))`
/// and its `α`-bounded form `C(n)(1 + δ_ρ/δ_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub assumptions: Assumptions,
    pub terms: BoundTerms,
    pub t: usize,
    pub t_plus: usize,
    pub rho: f64,
    pub theta0_norm: f64,
    pub ratio: f64,
    pub bound: f64,
    pub bound_alpha: f64,
    pub c_max: f64,
    /// `‖θ*_0‖ = 0` is outside the statement.
    pub excluded: bool,
    pub bound_holds: Option<bool>,
}

pub fn check_theorem1(
    problem: &Problem,
    fac: &PermutationFactorization,
    alpha: f64,
    cfg: &CheckConfig,
) -> Result<DriftReport> {
    let assumptions = assess(problem, fac, alpha, cfg)?;
    let drift = drift_recurrence(problem, fac)?;
    let direct = direct_minimizers(problem, fac)?;
    let (theta0, theta_t) = (&direct[0], &direct[fac.t()]);
    let xi = assumptions.accuracy.xi;
    let terms = bound_terms(problem, theta0, xi, fac.rho(), alpha);
    let theta0_norm = theta0.norm();
    let excluded = theta0_norm == 0.0;
    let n = problem.n() as f64;
    let t = fac.t() as f64;
    let (ratio, bound, bound_alpha) = if excluded {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let ratio = (theta_t - theta0).norm() / theta0_norm;
        let bound = xi / n * t * t * (1.0 + xi.sqrt() * fac.rho() / (4.0 * terms.delta_m));
        let bound_alpha = terms.c_n * (1.0 + terms.delta_rho / terms.delta_m);
        (ratio, bound, bound_alpha)
    };
    let bound_holds = (assumptions.holds() && !excluded).then_some(ratio <= bound && ratio <= bound_alpha);
    Ok(DriftReport {
        t: fac.t(),
        t_plus: fac.t_plus(),
        rho: fac.rho(),
        theta0_norm,
        ratio,
        bound,
        bound_alpha,
        c_max: max_c(&drift),
        excluded,
        bound_holds,
        terms,
        assumptions,
    })
}

impl Report for DriftReport {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f = assumption_fields(&self.assumptions);
        f.extend(term_fields(&self.terms));
        f.extend([
            ("T".into(), self.t.to_string()),
            ("T_plus".into(), self.t_plus.to_string()),
            ("rho".into(), num(self.rho)),
            ("theta0_norm".into(), num(self.theta0_norm)),
            ("c_max".into(), num(self.c_max)),
            ("excluded_zero_theta".into(), self.excluded.to_string()),
            ("ratio".into(), num(self.ratio)),
            ("bound".into(), num(self.bound)),
            ("bound_alpha".into(), num(self.bound_alpha)),
            ("verdict".into(), verdict(self.bound_holds)),
        ]);
        f
    }
}

/// Sign agreement on large-margin examples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImmunityReport {
    pub assumptions: Assumptions,
    pub terms: BoundTerms,
    pub kappa: f64,
    /// `ξ ((δ_m + δ_ρ)/κ)^{1/α}`; immunity is promised when `n` exceeds it.
    pub n_required: f64,
    pub size_condition: bool,
    /// Examples with `y θ*_0ᵀx > κ`.
    pub qualifying: usize,
    /// Qualifying examples with `y θ*_Tᵀx ≤ 0`.
    pub flips: Vec<usize>,
    pub verdict: Option<bool>,
}

impl ImmunityReport {
    pub fn immune(&self) -> bool {
        self.flips.is_empty()
    }
}

pub fn check_immunity(
    problem: &Problem,
    fac: &PermutationFactorization,
    alpha: f64,
    kappa: f64,
    cfg: &CheckConfig,
) -> Result<ImmunityReport> {
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(TheoryError::Problem(format!("kappa must be positive, got {kappa}")));
    }
    let assumptions = assess(problem, fac, alpha, cfg)?;
    let direct = direct_minimizers(problem, fac)?;
    let (theta0, theta_t) = (&direct[0], &direct[fac.t()]);
    let terms = bound_terms(problem, theta0, assumptions.accuracy.xi, fac.rho(), alpha);
    let n_required = assumptions.accuracy.xi * ((terms.delta_m + terms.delta_rho) / kappa).powf(1.0 / alpha);
    let size_condition = problem.n() as f64 > n_required;
    let x = problem.x();
    let mut qualifying = 0;
    let mut flips = Vec::new();
    for (i, &y) in problem.y().iter().enumerate() {
        if y * x.column(i).dot(theta0) > kappa {
            qualifying += 1;
            if y * x.column(i).dot(theta_t) <= 0.0 {
                flips.push(i);
            }
        }
    }
    let verdict = (assumptions.holds() && size_condition).then_some(flips.is_empty());
    Ok(ImmunityReport { assumptions, terms, kappa, n_required, size_condition, qualifying, flips, verdict })
}

impl Report for ImmunityReport {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f = assumption_fields(&self.assumptions);
        f.extend(term_fields(&self.terms));
        f.extend([
            ("kappa".into(), num(self.kappa)),
            ("n_required".into(), num(self.n_required)),
            ("size_condition".into(), flag(self.size_condition)),
            ("qualifying".into(), self.qualifying.to_string()),
            ("sign_flips".into(), self.flips.len().to_string()),
            ("verdict".into(), verdict(self.verdict)),
        ]);
        f
    }
}

/// Excess true-data loss of the drifted classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGapReport {
    pub assumptions: Assumptions,
    pub terms: BoundTerms,
    pub loss_optimal: f64,
    pub loss_drifted: f64,
    pub gap: f64,
    /// `Δᵀ (X Xᵀ/(8n) + γΓ) Δ` with `Δ = θ*_T - θ*_0`, equal to the gap for a
    /// quadratic objective minimized at `θ*_0`.
    pub quadratic_gap: f64,
    /// `δ̄ (δ_µ + 6 δ̄) C(n)`.
    pub bound: f64,
    pub bound_holds: Option<bool>,
}

pub fn check_loss_gap(
    problem: &Problem,
    fac: &PermutationFactorization,
    alpha: f64,
    cfg: &CheckConfig,
) -> Result<LossGapReport> {
    let assumptions = assess(problem, fac, alpha, cfg)?;
    let direct = direct_minimizers(problem, fac)?;
    let (theta0, theta_t) = (&direct[0], &direct[fac.t()]);
    let terms = bound_terms(problem, theta0, assumptions.accuracy.xi, fac.rho(), alpha);
    let loss_optimal = problem.true_loss(theta0)?;
    let loss_drifted = problem.true_loss(theta_t)?;
    let delta = theta_t - theta0;
    let n = problem.n() as f64;
    let x = problem.x();
    let curvature = x * x.transpose() / (8.0 * n) + problem.big_gamma() * problem.gamma();
    let quadratic_gap = delta.dot(&(curvature * &delta));
    let db = terms.delta_bar();
    let bound = db * (terms.delta_mu + 6.0 * db) * terms.c_n;
    let gap = loss_drifted - loss_optimal;
    let bound_holds = assumptions.holds().then_some(gap <= bound);
    Ok(LossGapReport { assumptions, terms, loss_optimal, loss_drifted, gap, quadratic_gap, bound, bound_holds })
}

impl Report for LossGapReport {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f = assumption_fields(&self.assumptions);
        f.extend(term_fields(&self.terms));
        f.extend([
            ("loss_optimal".into(), num(self.loss_optimal)),
            ("loss_drifted".into(), num(self.loss_drifted)),
            ("gap".into(), num(self.gap)),
            ("quadratic_gap".into(), num(self.quadratic_gap)),
            ("bound".into(), num(self.bound)),
            ("verdict".into(), verdict(self.bound_holds)),
        ]);
        f
    }
}

/// Right-hand side of the generalization bound, term by term.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizationTerms {
    pub terms: BoundTerms,
    pub delta: f64,
    pub lipschitz: f64,
    pub theta_star_bound: f64,
    /// Ridge Taylor loss of `θ*_0` on the true data.
    pub empirical_loss: f64,
    /// `2 L X_* θ_* / √n`.
    pub complexity: f64,
    /// `√(ln(2/δ) / 2n)`.
    pub confidence: f64,
    /// `δ̄ (δ_µ + 6 δ̄ + 4L/√n) C(n)`.
    pub u_n: f64,
    pub total: f64,
}

/// Lipschitz constant of the ridge Taylor loss over `‖θ‖ ≤ θ_*`: the
/// per-example gradient `(θᵀx/4 - y/2) x` is at most `X_*(θ_* X_*/4 + 1/2)`
/// and the ridge gradient `2γΓθ` at most `2γ λ_max(Γ) θ_*`.
pub fn lipschitz_bound(problem: &Problem, theta_star_bound: f64) -> f64 {
    let x_star = problem.x_star();
    x_star * (theta_star_bound * x_star / 4.0 + 0.5)
        + 2.0 * problem.gamma() * problem.gamma_spectrum().1 * theta_star_bound
}

#[allow(clippy::too_many_arguments)]
pub fn generalization_terms(
    problem: &Problem,
    fac: &PermutationFactorization,
    xi: f64,
    alpha: f64,
    delta: f64,
    lipschitz: f64,
    theta_star_bound: f64,
) -> Result<GeneralizationTerms> {
    let valid = delta > 0.0 && delta < 1.0 && lipschitz > 0.0 && theta_star_bound >= 0.0;
    if !valid {
        return Err(TheoryError::Problem("need 0 < delta < 1, L > 0 and theta_* >= 0".into()));
    }
    let theta0 = problem.minimizer(problem.x())?;
    let terms = bound_terms(problem, &theta0, xi, fac.rho(), alpha);
    let n = problem.n() as f64;
    let empirical_loss = problem.true_loss(&theta0)?;
    let complexity = 2.0 * lipschitz * problem.x_star() * theta_star_bound / n.sqrt();
    let confidence = ((2.0 / delta).ln() / (2.0 * n)).sqrt();
    let u_n = u_of_n(terms.delta_bar(), terms.delta_mu, lipschitz, n, terms.c_n);
    Ok(GeneralizationTerms {
        total: empirical_loss + complexity + confidence + u_n,
        terms,
        delta,
        lipschitz,
        theta_star_bound,
        empirical_loss,
        complexity,
        confidence,
        u_n,
    })
}

impl Report for GeneralizationTerms {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f = term_fields(&self.terms);
        f.extend([
            ("delta".into(), num(self.delta)),
            ("lipschitz".into(), num(self.lipschitz)),
            ("theta_star_bound".into(), num(self.theta_star_bound)),
            ("empirical_loss".into(), num(self.empirical_loss)),
            ("complexity".into(), num(self.complexity)),
            ("confidence".into(), num(self.confidence)),
            ("u_n".into(), num(self.u_n)),
            ("total".into(), num(self.total)),
        ]);
        f
    }
}
