// SPDX-License-Identifier: Apache-2.0

//! In-process sessions and the plaintext computations they must reproduce.

use nalgebra::DVector;
use vfl_learn::{
    batch_ranges, holdout_split, hstack, mean_operator_normalized, train_sag_weighted, weighted_taylor_gradient_sum,
    Dataset, TrainConfig,
};

use crate::error::{ProtocolError, Result};
use crate::message::Kind;
use crate::party::PartyRole;
use crate::party::{
    run_coordinator, run_provider_a, run_provider_b, CoordinatorOutput, Failure, ProviderAData, ProviderBData,
    ProviderReport, SessionParams, Trace,
};
use crate::transport::{in_process_mesh, Recorder, Transcript};

#[derive(Debug)]
pub struct SessionOutput {
    pub coordinator: CoordinatorOutput,
    pub provider_a: ProviderReport,
    pub provider_b: ProviderReport,
}

/// Runs all three parties on threads connected by in-process links.
pub fn run_session(
    params: &SessionParams,
    mask: &[bool],
    a: &ProviderAData,
    b: &ProviderBData,
    recorder: Option<&Recorder>,
) -> std::result::Result<SessionOutput, Failure> {
    let [mut ec, mut ea, mut eb] = in_process_mesh(params.session, params.timeout, recorder);
    let (rc, ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(move || run_provider_a(params, a, &mut ea));
        let hb = s.spawn(move || run_provider_b(params, b, &mut eb));
        let rc = run_coordinator(params, mask, &mut ec);
        drop(ec);
        (rc, ha.join(), hb.join())
    });
    let (pa, pb) = (provider(ra), provider(rb));
    match rc {
        Ok(coordinator) => Ok(SessionOutput { coordinator, provider_a: pa?, provider_b: pb? }),
        Err(mut failure) => {
            // A provider that failed first is the root cause of a coordinator
            // transport error or abort.
            if matches!(failure.error, ProtocolError::Transport(_) | ProtocolError::Aborted { .. }) {
                let root = [pa.err(), pb.err()]
                    .into_iter()
                    .flatten()
                    .map(|f| f.error)
                    .find(|e| !matches!(e, ProtocolError::Transport(_) | ProtocolError::Aborted { .. }));
                if let Some(e) = root {
                    failure.error = e;
                }
            }
            Err(failure)
        }
    }
}

fn provider(r: std::thread::Result<Result<ProviderReport>>) -> std::result::Result<ProviderReport, Failure> {
    match r {
        Ok(Ok(report)) => Ok(report),
        Ok(Err(error)) => Err(Failure { error, trace: Trace::default() }),
        Err(_) => Err(Failure { error: ProtocolError::Panic, trace: Trace::default() }),
    }
}

/// The joined plaintext dataset `[X_A | X_B]` with A's labels.
pub fn joined(a: &ProviderAData, b: &ProviderBData) -> Result<Dataset> {
    Ok(Dataset::new(hstack(&a.x, &b.x), a.y.clone())?)
}

pub fn mask_weights(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&m| f64::from(u8::from(m))).collect()
}

/// The plaintext configuration equivalent to a session.
pub fn oracle_config(params: &SessionParams) -> TrainConfig {
    params.train.clone()
}

/// `Σ_{i ∈ rows} m_i (θ·x_i/4 - y_i/2) x_i`.
pub fn masked_gradient_sum(theta: &DVector<f64>, data: &Dataset, mask: &[bool], rows: &[usize]) -> DVector<f64> {
    weighted_taylor_gradient_sum(theta, data, Some(&mask_weights(mask)), rows)
}

/// `(1/8h) Σ_H m_i (θ·x_i)² - θ·µ_H / 2` with `µ_H = (1/h) Σ_H m_i y_i x_i`:
/// the masked hold-out Taylor loss without its `log 2` term.
pub fn masked_holdout_loss(theta: &DVector<f64>, data: &Dataset, mask: &[bool], hold: &[usize]) -> f64 {
    let h = hold.len() as f64;
    let quad: f64 = hold
        .iter()
        .filter(|&&i| mask[i])
        .map(|&i| {
            let z = data.x.row(i).transpose().dot(theta);
            z * z
        })
        .sum::<f64>()
        / (8.0 * h);
    let mu = mean_operator_normalized(data, Some(&mask_weights(mask)), hold);
    quad - 0.5 * theta.dot(&mu)
}

/// `max |a - b| / max |b|`, or the plain difference when `b` is zero.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.amax();
    let diff = (a - b).amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest deviations of a finished session from the plaintext computations.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    /// Max over batches of `max |g_secure - g_plain| / max |g_plain|`.
    pub gradient_rel: f64,
    /// Max over epochs of `|l_secure - l_plain| / |l_plain|`.
    pub loss_rel: f64,
    /// `max |θ_secure - θ_plain|` against an independent plaintext SAG run.
    pub theta_abs: f64,
    pub plain_theta: DVector<f64>,
    pub gradients: usize,
    pub losses: usize,
}

/// Recomputes every decrypted gradient and loss in plaintext at the same
/// models, and reruns SAG in plaintext on the masked rows.
pub fn compare_with_oracle(
    params: &SessionParams,
    mask: &[bool],
    a: &ProviderAData,
    b: &ProviderBData,
    out: &CoordinatorOutput,
) -> Result<OracleReport> {
    let data = joined(a, b)?;
    let cfg = oracle_config(params);
    let (hold, train) = holdout_split(params.n, cfg.holdout, cfg.seed)?;
    let batches = batch_ranges(train.len(), cfg.batch);
    let mut gradient_rel: f64 = 0.0;
    for g in &out.trace.gradients {
        let rows = &train[batches[g.batch].clone()];
        let want = masked_gradient_sum(&g.theta, &data, mask, rows);
        gradient_rel = gradient_rel.max(relative_error(&g.sum, &want));
    }
    let mut loss_rel: f64 = 0.0;
    for l in &out.trace.losses {
        let want = masked_holdout_loss(&l.theta, &data, mask, &hold);
        let err = if l.loss == want { 0.0 } else { (l.loss - want).abs() / want.abs() };
        loss_rel = loss_rel.max(err);
    }
    let weights = mask_weights(mask);
    let plain = train_sag_weighted(&data, Some(&weights), &cfg)?;
    Ok(OracleReport {
        gradient_rel,
        loss_rel,
        theta_abs: (&out.theta - &plain.theta).amax(),
        plain_theta: plain.theta,
        gradients: out.trace.gradients.len(),
        losses: out.trace.losses.len(),
    })
}

/// What a transcript reveals about the providers' private inputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisibilityReport {
    /// Feature values whose binary64 bytes occur in some payload.
    pub feature_hits: usize,
    /// Windows of consecutive labels found as bytes or binary64 runs.
    pub label_hits: usize,
    /// Windows of consecutive mask bits found as bytes or binary64 runs.
    pub mask_hits: usize,
    /// Kinds of messages received by the coordinator other than encrypted
    /// gradient parts and losses.
    pub coordinator_inbound: Vec<Kind>,
    /// Kinds of messages sent by provider B other than `EncWZ` and `EncLoss`.
    pub b_outbound: Vec<Kind>,
}

impl VisibilityReport {
    pub fn clean(&self) -> bool {
        self.feature_hits == 0
            && self.label_hits == 0
            && self.mask_hits == 0
            && self.coordinator_inbound.is_empty()
            && self.b_outbound.is_empty()
    }
}

const WINDOW: usize = 16;

fn run_patterns(values: &[f64]) -> Vec<Vec<u8>> {
    let w = WINDOW.min(values.len());
    let mut out = Vec::new();
    // Constant windows are skipped: their byte runs (all zeros, say) also
    // arise from public values such as a zero model.
    for chunk in values.windows(w).step_by(w.max(1)).filter(|c| c.iter().any(|v| *v != c[0])) {
        out.push(chunk.iter().map(|&v| v as i8 as u8).collect());
        out.push(chunk.iter().flat_map(|v| v.to_be_bytes()).collect());
        out.push(chunk.iter().flat_map(|v| v.to_le_bytes()).collect());
    }
    out
}

/// Scans every payload for the providers' features, labels and mask, and
/// checks which message kinds reach the coordinator and leave provider B.
pub fn audit_transcript(t: &Transcript, a: &ProviderAData, b: &ProviderBData, mask: &[bool]) -> VisibilityReport {
    let features: Vec<f64> = a.x.iter().chain(b.x.iter()).copied().filter(|v| v.fract() != 0.0).collect();
    let count_runs = |values: &[f64]| run_patterns(values).iter().filter(|p| !t.find_bytes(p).is_empty()).count();
    let mut coordinator_inbound: Vec<Kind> = t
        .received_by(PartyRole::Coordinator)
        .map(|r| r.kind)
        .filter(|k| !matches!(k, Kind::EncGradParts | Kind::EncLoss))
        .collect();
    coordinator_inbound.dedup();
    let mut b_outbound: Vec<Kind> =
        t.sent_by(PartyRole::ProviderB).map(|r| r.kind).filter(|k| !matches!(k, Kind::EncWZ | Kind::EncLoss)).collect();
    b_outbound.dedup();
    VisibilityReport {
        feature_hits: t.find_f64(&features).len(),
        label_hits: count_runs(&a.y),
        mask_hits: count_runs(&mask_weights(mask)),
        coordinator_inbound,
        b_outbound,
    }
}

/// Ciphertexts per epoch: `(gradient traffic, loss traffic)` averaged over
/// the epochs of a session.
pub fn ciphertexts_per_epoch(t: &Transcript, epochs: usize) -> (f64, f64) {
    let grad = t.ciphertexts(Kind::EncPartialU) + t.ciphertexts(Kind::EncWZ) + t.ciphertexts(Kind::EncGradParts);
    let loss = t.ciphertexts(Kind::EncLoss);
    (grad as f64 / epochs as f64, loss as f64 / epochs as f64)
}

/// `2n + 2⌈n/s⌉d` ciphertexts: the per-epoch bound on gradient traffic.
pub fn gradient_traffic_bound(n_train: usize, batch: usize, d: usize) -> usize {
    2 * n_train + 2 * n_train.div_ceil(batch) * d
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use vfl_he::encoding::decrypt_f64;

    fn setup(n: usize, da: usize, db: usize, p_mask: f64, seed: u64) -> (ProviderAData, ProviderBData, Vec<bool>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let xa = DMatrix::from_fn(n, da, |_, _| rng.gen_range(-1.5..1.5));
        let xb = DMatrix::from_fn(n, db, |_, _| rng.gen_range(-1.5..1.5));
        let y =
            (0..n).map(|i| if xa[(i, 0)] - xb[(i, 0)] + rng.gen_range(-0.5..0.5) > 0.0 { 1.0 } else { -1.0 }).collect();
        let mask = (0..n).map(|_| rng.gen_bool(p_mask)).collect();
        (ProviderAData { x: xa, y }, ProviderBData { x: xb }, mask)
    }

    fn params(n: usize, da: usize, db: usize, batch: usize, holdout: usize, epochs: usize) -> SessionParams {
        let train = TrainConfig { batch, holdout, max_epochs: epochs, seed: 11, ..TrainConfig::default() };
        SessionParams { key_bits: 256, allow_insecure_key: true, ..SessionParams::new(n, da, db, train) }
    }

    #[test]
    fn cached_mean_operator_matches_plaintext() {
        let (a, b, mask) = setup(40, 2, 2, 0.6, 1);
        let p = params(40, 2, 2, 10, 8, 1);
        let out = run_session(&p, &mask, &a, &b, None).unwrap();
        let sk = &out.coordinator.private_key;
        let mu: Vec<f64> = out.provider_b.mu_h.iter().map(|c| decrypt_f64(sk, c).unwrap()).collect();
        let (hold, _) = holdout_split(40, 8, 11).unwrap();
        let data = joined(&a, &b).unwrap();
        let want = mean_operator_normalized(&data, Some(&mask_weights(&mask)), &hold);
        assert!((DVector::from_vec(mu) - want).amax() < 1e-15);
    }

    #[test]
    fn all_zero_mask_keeps_zero_model() {
        let (a, b, _) = setup(30, 1, 2, 0.5, 2);
        let out = run_session(&params(30, 1, 2, 7, 5, 3), &[false; 30], &a, &b, None).unwrap();
        let c = out.coordinator;
        assert!(c.trace.gradients.iter().all(|g| g.sum == DVector::zeros(3)));
        assert!(c.trace.losses.iter().all(|l| l.loss == 0.0));
        assert_eq!(c.theta, DVector::zeros(3));
    }

    #[test]
    fn single_batch_single_epoch_exchanges_once() {
        let (a, b, mask) = setup(12, 1, 1, 0.8, 3);
        let rec = Recorder::new();
        let out = run_session(&params(12, 1, 1, 10, 2, 1), &mask, &a, &b, Some(&rec)).unwrap();
        let t = rec.transcript();
        assert_eq!(t.count(Kind::EncPartialU), 1);
        assert_eq!(t.count(Kind::EncWZ), 1);
        assert_eq!(t.count(Kind::EncGradParts), 1);
        assert_eq!(t.count(Kind::EncLoss), 2);
        assert_eq!((out.provider_a.gradient_rounds, out.provider_b.loss_rounds), (1, 1));
        assert_eq!(out.coordinator.trace.gradients.len(), 1);
    }

    #[test]
    fn provider_dimension_error_aborts_session() {
        let (a, b, mask) = setup(20, 2, 2, 0.8, 4);
        let p = params(20, 2, 3, 5, 4, 2);
        let err = run_session(&p, &mask, &a, &b, None).unwrap_err();
        assert!(matches!(err.error, ProtocolError::Dimension(_)), "{:?}", err.error);
    }

    #[test]
    fn leakage_ceiling_aborts_before_keygen() {
        let (a, b, mut mask) = setup(20, 1, 1, 0.8, 5);
        mask.iter_mut().enumerate().for_each(|(i, m)| *m = i < 2);
        let p = SessionParams { leakage_ceiling: Some(0.5), ..params(20, 1, 1, 4, 4, 2) };
        let err = run_session(&p, &mask, &a, &b, None).unwrap_err();
        assert!(matches!(err.error, ProtocolError::Leakage { .. }));
        assert!(err.trace.gradients.is_empty());
    }

    #[test]
    fn weak_key_requires_opt_in() {
        let (a, b, mask) = setup(10, 1, 1, 0.8, 6);
        let p = SessionParams { allow_insecure_key: false, ..params(10, 1, 1, 4, 2, 1) };
        assert!(matches!(run_session(&p, &mask, &a, &b, None).unwrap_err().error, ProtocolError::Config(_)));
    }
}
