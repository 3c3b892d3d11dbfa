// SPDX-License-Identifier: Apache-2.0

//! The coordinator and the two data providers.
//!
//! Provider A holds `X_A` and the labels, provider B holds `X_B`; both hold
//! their rows already aligned by the linkage permutations. The coordinator
//! holds the linkage mask and the private key and only ever sees the model,
//! encrypted gradient parts and the encrypted hold-out loss.

use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use vfl_he::encoding::decrypt_f64;
#[cfg(any(test, feature = "test-hooks"))]
use vfl_he::PrivateKey;
use vfl_he::{keygen, keygen_insecure, Base, EncryptedNumber, PublicKey, MIN_SECURE_BITS};
use vfl_learn::{batch_ranges, holdout_split, ridge_step, EarlyStopping, LossKind, SagState, TrainConfig};

use crate::audit::audit_batch_leakage;
use crate::error::{ProtocolError, Result};
use crate::message::{Message, Purpose};
use crate::ops::{
    encrypt_mask, gradient_b, gradient_partial_a, gradient_parts_a, holdout_init_a, holdout_init_b, loss_partial_a,
    loss_total_b,
};
use crate::transport::Endpoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PartyRole {
    Coordinator = 0,
    ProviderA = 1,
    ProviderB = 2,
}

impl PartyRole {
    pub const ALL: [PartyRole; 3] = [PartyRole::Coordinator, PartyRole::ProviderA, PartyRole::ProviderB];

    pub fn from_u8(v: u8) -> Result<Self> {
        PartyRole::ALL
            .get(usize::from(v))
            .copied()
            .ok_or_else(|| ProtocolError::Malformed(format!("unknown party {v}")))
    }
}

/// Public session parameters, known to all three parties.
#[derive(Clone, Debug)]
pub struct SessionParams {
    pub session: u64,
    /// Rows held by each provider after linkage.
    pub n: usize,
    pub d_a: usize,
    pub d_b: usize,
    /// Optimizer settings; `seed` seeds A's hold-out sample.
    pub train: TrainConfig,
    pub key_bits: u64,
    /// Permits keys below 1024 bits (tests and demos only).
    pub allow_insecure_key: bool,
    pub base: Base,
    /// Abort when `P[a batch holds at most one match]` exceeds this.
    pub leakage_ceiling: Option<f64>,
    pub timeout: Duration,
}

impl SessionParams {
    pub fn new(n: usize, d_a: usize, d_b: usize, train: TrainConfig) -> Self {
        SessionParams {
            session: 1,
            n,
            d_a,
            d_b,
            train,
            key_bits: MIN_SECURE_BITS,
            allow_insecure_key: false,
            base: Base::DEFAULT,
            leakage_ceiling: None,
            timeout: Duration::from_secs(600),
        }
    }

    pub fn d(&self) -> usize {
        self.d_a + self.d_b
    }

    pub fn n_train(&self) -> usize {
        self.n - self.train.holdout
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.d_b == 0 {
            return Err(ProtocolError::Config("both providers need at least one feature".into()));
        }
        if self.train.holdout == 0 {
            return Err(ProtocolError::Config("hold-out size must be positive".into()));
        }
        if self.train.loss != LossKind::Taylor {
            return Err(ProtocolError::Config("the secure protocol trains the Taylor loss only".into()));
        }
        self.train.validate(self.n)?;
        self.train.ridge_matrix(self.d())?;
        if self.key_bits < MIN_SECURE_BITS && !self.allow_insecure_key {
            return Err(ProtocolError::Config(format!("{}-bit key is below {MIN_SECURE_BITS} bits", self.key_bits)));
        }
        Ok(())
    }
}

/// Provider A's local block: features and labels in linkage order.
#[derive(Clone, Debug)]
pub struct ProviderAData {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

/// Provider B's local block in linkage order.
#[derive(Clone, Debug)]
pub struct ProviderBData {
    pub x: DMatrix<f64>,
}

/// One decrypted gradient: the unscaled batch sum at model `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientRecord {
    pub epoch: usize,
    pub batch: usize,
    pub len: usize,
    pub theta: DVector<f64>,
    pub sum: DVector<f64>,
}

/// One decrypted hold-out loss (without the `log 2` term) at model `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub theta: DVector<f64>,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub gradients: Vec<GradientRecord>,
    pub losses: Vec<LossRecord>,
}

#[derive(Debug)]
pub struct CoordinatorOutput {
    pub theta: DVector<f64>,
    pub trace: Trace,
    pub epochs: usize,
    pub stopped_early: bool,
    /// `P[X <= 1]` for the number of matches in a batch.
    pub batch_leakage: f64,
    #[cfg(any(test, feature = "test-hooks"))]
    pub private_key: PrivateKey,
}

/// A failed coordinator run with everything decrypted before the failure.
#[derive(Debug)]
pub struct Failure {
    pub error: ProtocolError,
    pub trace: Trace,
}

#[derive(Debug, Default)]
pub struct ProviderReport {
    pub gradient_rounds: usize,
    pub loss_rounds: usize,
    #[cfg(any(test, feature = "test-hooks"))]
    pub mu_h: Vec<EncryptedNumber>,
}

fn unexpected<T>(from: PartyRole, expected: &'static str, got: &Message) -> Result<T> {
    Err(ProtocolError::Unexpected { from, expected, got: got.kind() })
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(ProtocolError::Dimension(format!("{what}: got {got}, expected {want}")));
    }
    Ok(())
}

fn receive_key(ep: &mut Endpoint, params: &SessionParams) -> Result<(PublicKey, Vec<EncryptedNumber>)> {
    let pk = match ep.recv(PartyRole::Coordinator)? {
        Message::PublicKey { key, base } => {
            if base != params.base {
                return Err(ProtocolError::Config(format!(
                    "session base {} but key announced {}",
                    params.base.value(),
                    base.value()
                )));
            }
            key
        }
        other => return unexpected(PartyRole::Coordinator, "PublicKey", &other),
    };
    ep.set_key(pk.clone(), params.base);
    let mask = match ep.recv(PartyRole::Coordinator)? {
        Message::EncMask(m) => m,
        other => return unexpected(PartyRole::Coordinator, "EncMask", &other),
    };
    check_len("encrypted mask", mask.len(), params.n)?;
    Ok((pk, mask))
}

fn with_abort<T>(ep: &mut Endpoint, r: Result<T>) -> Result<T> {
    if let Err(e) = &r {
        if !matches!(e, ProtocolError::Aborted { .. }) {
            ep.abort(&e.to_string());
        }
    }
    r
}

/// Runs the coordinator: key generation, mask distribution, then the
/// gradient and loss rounds until early stopping or `max_epochs`.
pub fn run_coordinator(
    params: &SessionParams,
    mask: &[bool],
    ep: &mut Endpoint,
) -> std::result::Result<CoordinatorOutput, Failure> {
    let mut trace = Trace::default();
    let r = coordinator(params, mask, ep, &mut trace);
    match with_abort(ep, r) {
        Ok(out) => Ok(CoordinatorOutput { trace, ..out }),
        Err(error) => Err(Failure { error, trace }),
    }
}

fn coordinator(
    params: &SessionParams,
    mask: &[bool],
    ep: &mut Endpoint,
    trace: &mut Trace,
) -> Result<CoordinatorOutput> {
    params.validate()?;
    check_len("mask", mask.len(), params.n)?;
    let cfg = &params.train;
    let matches = mask.iter().filter(|&&m| m).count();
    let batch_leakage = audit_batch_leakage(params.n as u64, matches as u64, cfg.batch as u64, 1)?;
    if let Some(ceiling) = params.leakage_ceiling {
        if batch_leakage > ceiling {
            return Err(ProtocolError::Leakage { probability: batch_leakage, ceiling });
        }
    }
    let (pk, sk) =
        if params.key_bits >= MIN_SECURE_BITS { keygen(params.key_bits)? } else { keygen_insecure(params.key_bits)? };
    ep.set_key(pk.clone(), params.base);
    let announce = Message::PublicKey { key: pk.clone(), base: params.base };
    ep.send(PartyRole::ProviderA, &announce)?;
    ep.send(PartyRole::ProviderB, &announce)?;
    let enc_mask = Message::EncMask(encrypt_mask(&pk, params.base, mask)?);
    ep.send(PartyRole::ProviderA, &enc_mask)?;
    ep.send(PartyRole::ProviderB, &enc_mask)?;

    let d = params.d();
    let big_gamma = cfg.ridge_matrix(d)?;
    let batches = batch_ranges(params.n_train(), cfg.batch);
    let mut sag = SagState::new(d, batches.len(), params.n_train());
    let mut stop = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut theta = DVector::zeros(d);
    let mut epochs = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        for (b, range) in batches.iter().enumerate() {
            let broadcast = Message::ModelBroadcast {
                purpose: Purpose::Gradient,
                batch: b as u64,
                theta: theta.as_slice().to_vec(),
            };
            ep.send(PartyRole::ProviderA, &broadcast)?;
            let (z_a, z_b) = match ep.recv(PartyRole::ProviderA)? {
                Message::EncGradParts { batch, len, z_a, z_b } => {
                    check_len("gradient batch index", batch as usize, b)?;
                    check_len("gradient batch size", len as usize, range.len())?;
                    check_len("gradient part from A", z_a.len(), params.d_a)?;
                    check_len("gradient part from B", z_b.len(), params.d_b)?;
                    (z_a, z_b)
                }
                other => return unexpected(PartyRole::ProviderA, "EncGradParts", &other),
            };
            let parts: Vec<f64> =
                z_a.par_iter().chain(z_b.par_iter()).map(|c| decrypt_f64(&sk, c)).collect::<vfl_he::Result<_>>()?;
            let sum = DVector::from_vec(parts);
            let grad = &sum / range.len() as f64;
            trace.gradients.push(GradientRecord { epoch, batch: b, len: range.len(), theta: theta.clone(), sum });
            let avg = sag.update(b, grad, range.len());
            theta = ridge_step(&theta, avg, cfg.eta, cfg.gamma, &big_gamma);
        }
        ep.send(
            PartyRole::ProviderA,
            &Message::ModelBroadcast { purpose: Purpose::Loss, batch: 0, theta: theta.as_slice().to_vec() },
        )?;
        let loss = match ep.recv(PartyRole::ProviderB)? {
            Message::EncLossTotal(l) => decrypt_f64(&sk, &l)?,
            other => return unexpected(PartyRole::ProviderB, "EncLoss", &other),
        };
        trace.losses.push(LossRecord { epoch, theta: theta.clone(), loss });
        if !loss.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(ProtocolError::NonFiniteLoss { epoch });
        }
        if stop.observe(loss) {
            stopped_early = true;
            break;
        }
    }
    ep.send(
        PartyRole::ProviderA,
        &Message::ModelBroadcast { purpose: Purpose::Stop, batch: 0, theta: theta.as_slice().to_vec() },
    )?;
    Ok(CoordinatorOutput {
        theta,
        trace: Trace::default(),
        epochs,
        stopped_early,
        batch_leakage,
        #[cfg(any(test, feature = "test-hooks"))]
        private_key: sk,
    })
}

/// Runs provider A (features `X_A` and labels).
pub fn run_provider_a(params: &SessionParams, data: &ProviderAData, ep: &mut Endpoint) -> Result<ProviderReport> {
    let r = provider_a(params, data, ep);
    with_abort(ep, r)
}

fn provider_a(params: &SessionParams, data: &ProviderAData, ep: &mut Endpoint) -> Result<ProviderReport> {
    params.validate()?;
    check_len("rows of X_A", data.x.nrows(), params.n)?;
    check_len("columns of X_A", data.x.ncols(), params.d_a)?;
    check_len("labels", data.y.len(), params.n)?;
    if data.y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(ProtocolError::Config("labels must be -1 or +1".into()));
    }
    let (pk, mask) = receive_key(ep, params)?;
    let base = params.base;
    let cfg = &params.train;
    let h = cfg.holdout;
    let (hold, train) = holdout_split(params.n, h, cfg.seed)?;

    let (mu_a, my) = holdout_init_a(&pk, base, &mask, &data.x, &data.y, &hold)?;
    let holdout = hold.iter().map(|&i| i as u64).collect();
    ep.send(PartyRole::ProviderB, &Message::HoldoutInit { holdout, mu_a, my })?;

    let batches = batch_ranges(train.len(), cfg.batch);
    let mut report = ProviderReport::default();
    loop {
        let (purpose, b, theta) = match ep.recv(PartyRole::Coordinator)? {
            Message::ModelBroadcast { purpose, batch, theta } => (purpose, batch as usize, theta),
            other => return unexpected(PartyRole::Coordinator, "ModelBroadcast", &other),
        };
        check_len("model", theta.len(), params.d())?;
        let theta_a = &theta[..params.d_a];
        match purpose {
            Purpose::Gradient => {
                let range = batches
                    .get(b)
                    .ok_or_else(|| ProtocolError::Dimension(format!("batch {b} of {}", batches.len())))?;
                let rows = &train[range.clone()];
                let u = gradient_partial_a(&pk, base, &mask, &data.x, &data.y, rows, theta_a)?;
                let rows_wire = rows.iter().map(|&i| i as u64).collect();
                ep.send(PartyRole::ProviderB, &Message::EncPartialU { theta: theta.clone(), rows: rows_wire, u })?;
                let (w, z_b) = match ep.recv(PartyRole::ProviderB)? {
                    Message::EncWZ { w, z } => (w, z),
                    other => return unexpected(PartyRole::ProviderB, "EncWZ", &other),
                };
                check_len("<w>", w.len(), rows.len())?;
                check_len("<z>", z_b.len(), params.d_b)?;
                let z_a = gradient_parts_a(&pk, base, &data.x, rows, &w)?;
                let parts = Message::EncGradParts { batch: b as u64, len: rows.len() as u64, z_a, z_b };
                ep.send(PartyRole::Coordinator, &parts)?;
                report.gradient_rounds += 1;
            }
            Purpose::Loss => {
                let (mu, quad) = loss_partial_a(&pk, base, &mask, &data.x, &hold, theta_a)?;
                ep.send(PartyRole::ProviderB, &Message::EncLossPartial { theta: theta.clone(), mu, quad })?;
                report.loss_rounds += 1;
            }
            Purpose::Stop => {
                ep.send(PartyRole::ProviderB, &Message::ModelBroadcast { purpose: Purpose::Stop, batch: 0, theta })?;
                return Ok(report);
            }
        }
    }
}

/// Runs provider B (features `X_B`).
pub fn run_provider_b(params: &SessionParams, data: &ProviderBData, ep: &mut Endpoint) -> Result<ProviderReport> {
    let r = provider_b(params, data, ep);
    with_abort(ep, r)
}

fn provider_b(params: &SessionParams, data: &ProviderBData, ep: &mut Endpoint) -> Result<ProviderReport> {
    params.validate()?;
    check_len("rows of X_B", data.x.nrows(), params.n)?;
    check_len("columns of X_B", data.x.ncols(), params.d_b)?;
    let (pk, mask) = receive_key(ep, params)?;
    let base = params.base;
    let h = params.train.holdout;

    let (hold, mu_h) = match ep.recv(PartyRole::ProviderA)? {
        Message::HoldoutInit { holdout, mu_a, my } => {
            check_len("hold-out rows", holdout.len(), h)?;
            check_len("<u>", mu_a.len(), params.d_a)?;
            check_len("<m ∘ y>_H", my.len(), h)?;
            let hold = valid_rows(&holdout, params.n)?;
            let mu_h = holdout_init_b(&pk, base, &data.x, &hold, mu_a, &my)?;
            (hold, mu_h)
        }
        other => return unexpected(PartyRole::ProviderA, "HoldoutInit", &other),
    };

    let mut report = ProviderReport::default();
    loop {
        match ep.recv(PartyRole::ProviderA)? {
            Message::EncPartialU { theta, rows, u } => {
                check_len("model", theta.len(), params.d())?;
                check_len("<u'>", u.len(), rows.len())?;
                let rows = valid_rows(&rows, params.n)?;
                if rows.is_empty() || rows.len() > params.train.batch {
                    return Err(ProtocolError::Dimension(format!("batch of {} rows", rows.len())));
                }
                let (w, z) = gradient_b(&pk, base, &mask, &data.x, &rows, &theta[params.d_a..], &u)?;
                ep.send(PartyRole::ProviderA, &Message::EncWZ { w, z })?;
                report.gradient_rounds += 1;
            }
            Message::EncLossPartial { theta, mu, quad } => {
                check_len("model", theta.len(), params.d())?;
                check_len("<m ∘ u>", mu.len(), h)?;
                let loss = loss_total_b(&pk, base, &mask, &data.x, &hold, &theta, &mu_h, &mu, quad)?;
                ep.send(PartyRole::Coordinator, &Message::EncLossTotal(loss))?;
                report.loss_rounds += 1;
            }
            Message::ModelBroadcast { purpose: Purpose::Stop, .. } => {
                #[cfg(any(test, feature = "test-hooks"))]
                {
                    report.mu_h = mu_h;
                }
                return Ok(report);
            }
            other => return unexpected(PartyRole::ProviderA, "EncPartialU, EncLoss or stop", &other),
        }
    }
}

fn valid_rows(rows: &[u64], n: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; n];
    rows.iter()
        .map(|&r| {
            let i = usize::try_from(r)
                .ok()
                .filter(|&i| i < n)
                .ok_or_else(|| ProtocolError::Dimension(format!("row {r} out of {n}")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(ProtocolError::Dimension(format!("row {r} repeated")));
            }
            Ok(i)
        })
        .collect()
}
