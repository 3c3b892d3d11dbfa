// SPDX-License-Identifier: Apache-2.0

//! How entity-resolution mistakes move the optimal ridge Taylor classifier.
//!
//! A linkage error is a permutation of the shuffle-block columns, factored
//! into transpositions. This crate computes the exact classifier drift by a
//! Sherman-Morrison recurrence, estimates the `(ε, τ)` accuracy of a
//! factorization, and evaluates the drift, immunity, loss-gap and
//! generalization bounds against direct solves.

mod accuracy;
mod bounds;
mod error;
mod instance;
mod perm;
mod problem;
mod recurrence;
mod report;
mod suite;

pub use accuracy::{
    check_directions, constraints, estimate_accuracy, required_tau, AccuracyEstimate, Constraint, DirectionCheck,
};
pub use bounds::{
    assess, bound_terms, c_of_n, calibrating_gamma, calibration, check_immunity, check_loss_gap, check_recurrence,
    check_theorem1, direction_sample, generalization_terms, lipschitz_bound, stretch_variance, stretch_variance_inf,
    u_of_n, Assumptions, BoundTerms, Calibration, CheckConfig, DriftReport, GeneralizationTerms, ImmunityReport,
    LossGapReport, RecurrenceReport,
};
pub use error::{Result, TheoryError};
pub use instance::{construct_instance, random_instance, Constructed, InstanceSpec, ALPHA_GRID};
pub use perm::{random_permutation, PermutationFactorization};
pub use problem::Problem;
pub use recurrence::{direct_minimizers, drift_recurrence, invertible, recurrence_error, Drift, Step};
pub use report::Report;
pub use suite::{bound_suite, recurrence_suite, BoundOutcome, SuiteSummary};
