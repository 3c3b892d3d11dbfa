// SPDX-License-Identifier: Apache-2.0

//! Batches of independent seeded checks, run in parallel.

use rayon::prelude::*;

use crate::bounds::{
    check_loss_gap, check_recurrence, check_theorem1, CheckConfig, DriftReport, LossGapReport, RecurrenceReport,
};
use crate::error::Result;
use crate::instance::{construct_instance, random_instance, InstanceSpec};
use crate::report::{num, Report};

/// Recurrence exactness on `count` random instances seeded from `seed`.
pub fn recurrence_suite(count: usize, seed: u64) -> Vec<Result<RecurrenceReport>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let (p, f) = random_instance(seed.wrapping_add(k))?;
            check_recurrence(&p, &f)
        })
        .collect()
}

/// Drift and loss-gap checks on one constructed instance.
#[derive(Clone, Debug)]
pub struct BoundOutcome {
    pub spec: InstanceSpec,
    pub drift: DriftReport,
    pub loss: LossGapReport,
    /// `µ_T == µ_0` bit for bit; only evaluated when every swap is within a
    /// class.
    pub mean_invariant: Option<bool>,
}

/// Drift and loss-gap checks on `count` constructed instances.
pub fn bound_suite(count: usize, seed: u64, cfg: &CheckConfig) -> Vec<Result<BoundOutcome>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let spec = InstanceSpec::sample(seed.wrapping_add(k));
            let c = construct_instance(&spec, cfg)?;
            let drift = check_theorem1(&c.problem, &c.fac, spec.alpha, cfg)?;
            let loss = check_loss_gap(&c.problem, &c.fac, spec.alpha, cfg)?;
            let mean_invariant = (c.fac.t_plus() == 0).then(|| {
                let last = c.problem.permuted(&c.fac, c.fac.t());
                c.problem.mean_operator(&last) == c.problem.mean_operator(c.problem.x())
            });
            Ok(BoundOutcome { spec, drift, loss, mean_invariant })
        })
        .collect()
}

/// Counts over a bound suite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteSummary {
    pub instances: usize,
    pub errors: usize,
    pub assumptions_hold: usize,
    pub drift_violations: usize,
    pub loss_violations: usize,
    pub within_class: usize,
    pub mean_invariance_failures: usize,
    /// Largest ratio / bound seen for the drift bound.
    pub worst_drift_tightness: f64,
    /// Largest gap / bound seen for the loss-gap bound.
    pub worst_loss_tightness: f64,
}

impl SuiteSummary {
    pub fn from_outcomes(outcomes: &[Result<BoundOutcome>]) -> Self {
        let mut s = SuiteSummary { instances: outcomes.len(), ..Default::default() };
        for o in outcomes {
            let Ok(o) = o else {
                s.errors += 1;
                continue;
            };
            if o.drift.assumptions.holds() {
                s.assumptions_hold += 1;
            }
            if o.drift.bound_holds == Some(false) {
                s.drift_violations += 1;
            }
            if o.loss.bound_holds == Some(false) {
                s.loss_violations += 1;
            }
            if let Some(ok) = o.mean_invariant {
                s.within_class += 1;
                if !ok {
                    s.mean_invariance_failures += 1;
                }
            }
            if o.drift.bound_holds.is_some() && o.drift.bound > 0.0 {
                s.worst_drift_tightness = s.worst_drift_tightness.max(o.drift.ratio / o.drift.bound);
            }
            if o.loss.bound_holds.is_some() && o.loss.bound > 0.0 {
                s.worst_loss_tightness = s.worst_loss_tightness.max(o.loss.gap / o.loss.bound);
            }
        }
        s
    }
}

impl Report for SuiteSummary {
    fn fields(&self) -> Vec<(String, String)> {
        vec![
            ("instances".into(), self.instances.to_string()),
            ("errors".into(), self.errors.to_string()),
            ("assumptions_hold".into(), self.assumptions_hold.to_string()),
            ("drift_violations".into(), self.drift_violations.to_string()),
            ("loss_violations".into(), self.loss_violations.to_string()),
            ("within_class".into(), self.within_class.to_string()),
            ("mean_invariance_failures".into(), self.mean_invariance_failures.to_string()),
            ("worst_drift_tightness".into(), num(self.worst_drift_tightness)),
            ("worst_loss_tightness".into(), num(self.worst_loss_tightness)),
        ]
    }
}
