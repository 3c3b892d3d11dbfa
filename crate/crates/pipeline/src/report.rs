// SPDX-License-Identifier: Apache-2.0

//! Run reports as aligned text or `key=value` lines.

use vfl_learn::Metrics;
use vfl_theory::Report;

use crate::config::Mode;

/// Ciphertexts per epoch against the cost expressions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Traffic {
    pub gradient_per_epoch: f64,
    /// `2 n_train + 2 ⌈n_train / s⌉ d`.
    pub gradient_bound: usize,
    pub loss_per_epoch: f64,
    /// `h + 2`.
    pub loss_expected: usize,
}

impl Traffic {
    pub fn holds(&self) -> bool {
        self.gradient_per_epoch <= self.gradient_bound as f64 && self.loss_per_epoch == self.loss_expected as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub shared: f64,
    pub population: usize,
    pub test_rows: usize,
    pub rows_a: usize,
    pub rows_b: usize,
    /// Entities present in both views.
    pub common: usize,
    /// Rows aligned by entity resolution.
    pub aligned: usize,
    /// Mask-1 rows.
    pub matches: usize,
    /// Share of mask-1 rows joining two different entities.
    pub match_error: f64,
    /// Share of common entities linked correctly.
    pub match_recall: f64,
    pub holdout: usize,
    pub batch: usize,
    /// Plaintext training on the perfectly linked rows.
    pub baseline: Metrics,
    /// Training on the linkage (secure or plaintext), absent after an abort.
    pub result: Option<Metrics>,
    pub epochs: usize,
    pub stopped_early: bool,
    /// `P[a batch holds at most one match]`.
    pub batch_leakage: Option<f64>,
    pub traffic: Option<Traffic>,
    /// No feature, label or mask bytes in any protocol message.
    pub transcript_clean: Option<bool>,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
    pub abort: Option<String>,
}

fn metric(v: f64) -> String {
    format!("{v:.4}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "n/a".to_string(), f)
}

impl RunReport {
    /// Result minus baseline, in points: `(accuracy, auc, f1)`.
    pub fn deltas(&self) -> Option<(f64, f64, f64)> {
        self.result.map(|r| (r.accuracy - self.baseline.accuracy, r.auc - self.baseline.auc, r.f1 - self.baseline.f1))
    }

    /// Every field except wall-clock timings.
    pub fn deterministic_fields(&self) -> Vec<(String, String)> {
        self.fields().into_iter().filter(|(k, _)| !k.starts_with("time.")).collect()
    }
}

impl Report for RunReport {
    fn fields(&self) -> Vec<(String, String)> {
        let mut f: Vec<(String, String)> = vec![
            ("mode".into(), self.mode.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("shared".into(), self.shared.to_string()),
            ("population".into(), self.population.to_string()),
            ("test_rows".into(), self.test_rows.to_string()),
            ("rows_a".into(), self.rows_a.to_string()),
            ("rows_b".into(), self.rows_b.to_string()),
            ("common_entities".into(), self.common.to_string()),
            ("aligned_rows".into(), self.aligned.to_string()),
            ("matches".into(), self.matches.to_string()),
            ("match_error_rate".into(), format!("{:.6}", self.match_error)),
            ("match_recall".into(), format!("{:.6}", self.match_recall)),
            ("holdout".into(), self.holdout.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("baseline.accuracy".into(), metric(self.baseline.accuracy)),
            ("baseline.auc".into(), metric(self.baseline.auc)),
            ("baseline.f1".into(), metric(self.baseline.f1)),
        ];
        let name = if self.mode == Mode::Secure { "secure" } else { "plaintext" };
        f.push((format!("{name}.accuracy"), opt(self.result, |m| metric(m.accuracy))));
        f.push((format!("{name}.auc"), opt(self.result, |m| metric(m.auc))));
        f.push((format!("{name}.f1"), opt(self.result, |m| metric(m.f1))));
        let d = self.deltas();
        f.push(("delta.accuracy".into(), opt(d, |d| metric(d.0))));
        f.push(("delta.auc".into(), opt(d, |d| metric(d.1))));
        f.push(("delta.f1".into(), opt(d, |d| metric(d.2))));
        f.push(("epochs".into(), self.epochs.to_string()));
        f.push(("stopped_early".into(), self.stopped_early.to_string()));
        f.push(("leakage.batch_at_most_one_match".into(), opt(self.batch_leakage, |p| format!("{p:.6e}"))));
        f.push(("traffic.gradient_per_epoch".into(), opt(self.traffic, |t| format!("{:.1}", t.gradient_per_epoch))));
        f.push(("traffic.gradient_bound".into(), opt(self.traffic, |t| t.gradient_bound.to_string())));
        f.push(("traffic.loss_per_epoch".into(), opt(self.traffic, |t| format!("{:.1}", t.loss_per_epoch))));
        f.push(("traffic.loss_expected".into(), opt(self.traffic, |t| t.loss_expected.to_string())));
        f.push(("traffic.within_formula".into(), opt(self.traffic, |t| t.holds().to_string())));
        f.push(("transcript_clean".into(), opt(self.transcript_clean, |c| c.to_string())));
        f.push(("abort".into(), self.abort.clone().unwrap_or_else(|| "none".into())));
        for (phase, s) in &self.timings {
            f.push((format!("time.{phase}"), format!("{s:.3}")));
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        RunReport {
            mode: Mode::Secure,
            seed: 1,
            shared: 0.66,
            population: 100,
            test_rows: 20,
            rows_a: 40,
            rows_b: 50,
            common: 30,
            aligned: 40,
            matches: 29,
            match_error: 1.0 / 29.0,
            match_recall: 28.0 / 30.0,
            holdout: 4,
            batch: 16,
            baseline: Metrics { accuracy: 80.0, auc: 90.0, f1: 50.0 },
            result: Some(Metrics { accuracy: 80.5, auc: 89.75, f1: 50.0 }),
            epochs: 3,
            stopped_early: false,
            batch_leakage: Some(1e-3),
            traffic: Some(Traffic {
                gradient_per_epoch: 100.0,
                gradient_bound: 110,
                loss_per_epoch: 6.0,
                loss_expected: 6,
            }),
            transcript_clean: Some(true),
            timings: vec![("match".into(), 0.25)],
            abort: None,
        }
    }

    #[test]
    fn deltas_are_result_minus_baseline() {
        assert_eq!(report().deltas(), Some((0.5, -0.25, 0.0)));
        let aborted = RunReport { result: None, ..report() };
        assert_eq!(aborted.deltas(), None);
        assert!(aborted.key_values("").contains("delta.auc=n/a"));
    }

    #[test]
    fn renderings() {
        let r = report();
        let kv = r.key_values("");
        assert!(kv.contains("secure.accuracy=80.5000\n"));
        assert!(kv.contains("delta.accuracy=0.5000\n"));
        assert!(kv.contains("traffic.within_formula=true\n"));
        assert!(kv.contains("time.match=0.250\n"));
        assert!(r.text("run").starts_with("run\n"));
        assert!(r.deterministic_fields().iter().all(|(k, _)| !k.starts_with("time.")));
    }

    #[test]
    fn traffic_formula_check() {
        let t = Traffic { gradient_per_epoch: 111.0, gradient_bound: 110, loss_per_epoch: 6.0, loss_expected: 6 };
        assert!(!t.holds());
        let t = Traffic { gradient_per_epoch: 110.0, loss_per_epoch: 5.0, ..t };
        assert!(!t.holds());
    }
}
