// SPDX-License-Identifier: Apache-2.0

//! Theory mode: the recurrence and bound suites on seeded instances.

use vfl_theory::{bound_suite, recurrence_suite, CheckConfig, Report, SuiteSummary};

/// Largest relative gap accepted between recurrence and direct solves.
pub const RECURRENCE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryRun {
    pub seed: u64,
    pub recurrence_instances: usize,
    pub recurrence_errors: usize,
    pub recurrence_failures: usize,
    pub worst_recurrence_error: f64,
    pub bounds: SuiteSummary,
}

impl TheoryRun {
    /// Every instance passes its assumption checks and no bound fails.
    pub fn passed(&self) -> bool {
        let b = &self.bounds;
        self.recurrence_errors == 0
            && self.recurrence_failures == 0
            && b.errors == 0
            && b.assumptions_hold == b.instances
            && b.drift_violations == 0
            && b.loss_violations == 0
            && b.mean_invariance_failures == 0
    }
}

/// Runs `instances` recurrence instances and `instances` bound instances.
pub fn run_theory(instances: usize, seed: u64) -> TheoryRun {
    let rec = recurrence_suite(instances, seed);
    let mut run = TheoryRun {
        seed,
        recurrence_instances: instances,
        recurrence_errors: 0,
        recurrence_failures: 0,
        worst_recurrence_error: 0.0,
        bounds: SuiteSummary::from_outcomes(&bound_suite(instances, seed, &CheckConfig::default())),
    };
    for r in &rec {
        match r {
            Ok(r) => {
                run.worst_recurrence_error = run.worst_recurrence_error.max(r.theta_error);
                run.recurrence_failures += usize::from(!r.passes(RECURRENCE_TOLERANCE));
            }
            Err(_) => run.recurrence_errors += 1,
        }
    }
    run
}

impl Report for TheoryRun {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("recurrence.instances".into(), self.recurrence_instances.to_string()),
            ("recurrence.errors".into(), self.recurrence_errors.to_string()),
            ("recurrence.failures".into(), self.recurrence_failures.to_string()),
            ("recurrence.worst_error".into(), format!("{:.6e}", self.worst_recurrence_error)),
        ];
        f.extend(self.bounds.fields().into_iter().map(|(k, v)| (format!("bounds.{k}"), v)));
        f.push(("passed".into(), self.passed().to_string()));
        f
    }
}
