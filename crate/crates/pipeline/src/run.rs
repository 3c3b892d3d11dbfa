// SPDX-License-Identifier: Apache-2.0

//! The end-to-end experiment: population, test split, vertical split,
//! corrupted identifiers, CLK linkage, secure (or plaintext) training on the
//! linkage, and a perfectly linked plaintext baseline.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vfl_clk::{build_clk, match_clks, Clk, Linkage};
use vfl_learn::{balance_weights, evaluate, hstack, train_sag_weighted, Dataset, Standardizer, Table, TrainConfig};
use vfl_protocol::{
    audit_transcript, ciphertexts_per_epoch, gradient_traffic_bound, joined, mask_weights, run_session, ProviderAData,
    ProviderBData, Recorder, SessionParams,
};

use crate::config::{Balance, DataSource, Mode, RunConfig};
use crate::corrupt::corrupt_pi;
use crate::credit::credit_table;
use crate::error::{PipelineError, Result};
use crate::report::{RunReport, Traffic};
use crate::split::{vertical_split, Population, Split};

/// Seeds derived from the run seed, one per random step.
#[derive(Clone, Copy, Debug)]
struct Seeds {
    data: u64,
    test: u64,
    split: u64,
    balance: u64,
    corrupt_a: u64,
    corrupt_b: u64,
    linkage: u64,
}

impl Seeds {
    fn new(seed: u64) -> Self {
        let s = |k: u64| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k);
        Seeds { data: s(1), test: s(2), split: s(3), balance: s(4), corrupt_a: s(5), corrupt_b: s(6), linkage: s(7) }
    }
}

pub fn load_table(cfg: &RunConfig) -> Result<Table> {
    match &cfg.source {
        DataSource::Synthetic { rows } => Ok(credit_table(*rows, Seeds::new(cfg.seed).data)),
        DataSource::Csv(path) => Ok(Table::read(path)?),
    }
}

/// Entities set aside for evaluation and the rest, both sorted.
pub fn test_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let k = (fraction * n as f64).round() as usize;
    let (mut test, mut rest) = (ids[..k].to_vec(), ids[k..].to_vec());
    test.sort_unstable();
    rest.sort_unstable();
    (test, rest)
}

/// Rows aligned by a linkage: A's rows `sigma`, B's rows `tau`.
pub fn aligned(split: &Split, link: &Linkage) -> (ProviderAData, ProviderBData) {
    let a =
        ProviderAData { x: split.a.x.select_rows(&link.sigma), y: link.sigma.iter().map(|&i| split.a.y[i]).collect() };
    let b = ProviderBData { x: split.b.x.select_rows(&link.tau) };
    (a, b)
}

/// The same A rows as `link`, each paired with its true partner in B; rows
/// of A without a partner keep the linkage's B row and mask 0.
pub fn perfectly_linked(split: &Split, link: &Linkage) -> (ProviderAData, ProviderBData, Vec<bool>) {
    let partner = split.truth.partner_of_a();
    let tau: Vec<usize> = link.sigma.iter().zip(&link.tau).map(|(&i, &j)| partner[i].unwrap_or(j)).collect();
    let mask = link.sigma.iter().map(|&i| partner[i].is_some()).collect();
    let a =
        ProviderAData { x: split.a.x.select_rows(&link.sigma), y: link.sigma.iter().map(|&i| split.a.y[i]).collect() };
    (a, ProviderBData { x: split.b.x.select_rows(&tau) }, mask)
}

/// Share of mask-1 rows whose two sides are different entities, and the
/// share of common entities that were linked correctly.
pub fn linkage_quality(split: &Split, link: &Linkage) -> (f64, f64) {
    let (mut wrong, mut right) = (0usize, 0usize);
    for k in 0..link.len() {
        if link.mask[k] {
            if split.truth.a[link.sigma[k]] == split.truth.b[link.tau[k]] {
                right += 1;
            } else {
                wrong += 1;
            }
        }
    }
    let error = if wrong + right == 0 { 0.0 } else { wrong as f64 / (wrong + right) as f64 };
    let common = split.truth.common();
    let recall = if common == 0 { 1.0 } else { right as f64 / common as f64 };
    (error, recall)
}

/// Standardizes `x` in place by its own column statistics.
pub fn standardize_view(x: &mut DMatrix<f64>) -> Result<Standardizer> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let s = Standardizer::fit(x, &rows)?;
    s.transform(x);
    Ok(s)
}

/// `x` with a trailing column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// Train configuration for `n` aligned rows: hold-out from its share, batch
/// capped by the training rows.
pub fn train_config(cfg: &RunConfig, n: usize) -> Result<TrainConfig> {
    let holdout = ((cfg.holdout_fraction * n as f64).ceil() as usize).max(1);
    if holdout + 1 > n {
        return Err(PipelineError::Data(format!("{n} aligned rows leave nothing to train on")));
    }
    let mut train = cfg.train.clone();
    train.holdout = holdout;
    train.batch = train.batch.min(n - holdout);
    train.seed = cfg.seed;
    Ok(train)
}

fn weights(cfg: &RunConfig, y: &[f64], mask: &[bool]) -> Vec<f64> {
    let m = mask_weights(mask);
    if cfg.balance != Balance::Weights {
        return m;
    }
    let rows: Vec<usize> = (0..y.len()).filter(|&i| mask[i]).collect();
    balance_weights(y, &rows).iter().zip(&m).map(|(w, m)| w * m).collect()
}

struct Timer(Vec<(String, f64)>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(Vec::new(), Instant::now())
    }

    fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        self.0.push((phase.to_string(), (now - self.1).as_secs_f64()));
        self.1 = now;
    }
}

/// The two provider views before any provider-side preprocessing: corrupted
/// identifiers, raw features, A balanced.
#[derive(Clone, Debug)]
pub struct Views {
    pub population: Population,
    pub test_ids: Vec<usize>,
    pub split: Split,
}

fn build_views(cfg: &RunConfig, t: &mut Timer) -> Result<Views> {
    cfg.validate()?;
    let seeds = Seeds::new(cfg.seed);
    let table = load_table(cfg)?;
    let population = Population::from_table(&table, cfg)?;
    t.lap("load");
    let (test_ids, pool) = test_split(population.len(), cfg.test_fraction, seeds.test);
    let mut split = vertical_split(&population, &pool, cfg.shared, cfg.view_rows, seeds.split)?;
    if cfg.balance == Balance::Subsample {
        split.balance_a(seeds.balance);
    }
    split.a.pi = corrupt_pi(&split.a.pi, cfg.typo_rate, cfg.missing_rate, seeds.corrupt_a);
    split.b.pi = corrupt_pi(&split.b.pi, cfg.typo_rate, cfg.missing_rate, seeds.corrupt_b);
    t.lap("split");
    Ok(Views { population, test_ids, split })
}

/// Builds the population, holds out the test entities, splits the rest,
/// lets A balance its rows and corrupts identifiers.
pub fn views(cfg: &RunConfig) -> Result<Views> {
    build_views(cfg, &mut Timer::new())
}

/// Everything before training: standardized views, linkage and the test set.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub population: usize,
    pub split: Split,
    pub linkage: Linkage,
    pub test: Dataset,
}

/// [`views`], then per-provider standardization (A adds an intercept column)
/// and CLK linkage.
pub fn prepare(cfg: &RunConfig, timings: &mut Vec<(String, f64)>) -> Result<Prepared> {
    let mut t = Timer::new();
    let Views { population: pop, test_ids, mut split } = build_views(cfg, &mut t)?;
    let sa = standardize_view(&mut split.a.x)?;
    let sb = standardize_view(&mut split.b.x)?;
    split.a.x = with_intercept(&split.a.x);
    let mut test = pop.joined(&test_ids)?;
    let (mut ta, mut tb) = (pop.xa.select_rows(&test_ids), pop.xb.select_rows(&test_ids));
    sa.transform(&mut ta);
    sb.transform(&mut tb);
    test.x = hstack(&with_intercept(&ta), &tb);

    let clks = |pi: &[vfl_clk::Record]| -> Vec<Clk> { pi.iter().map(|r| build_clk(r, &cfg.clk)).collect() };
    let (ca, cb) = (clks(&split.a.pi), clks(&split.b.pi));
    t.lap("clk");
    let linkage = match_clks(&ca, &cb, cfg.threshold, Seeds::new(cfg.seed).linkage)?;
    t.lap("match");
    timings.extend(t.0);
    Ok(Prepared { population: pop.len(), split, linkage, test })
}

fn train_plain(
    cfg: &RunConfig,
    a: &ProviderAData,
    b: &ProviderBData,
    mask: &[bool],
    train: &TrainConfig,
) -> Result<(DVector<f64>, usize)> {
    let data = joined(a, b)?;
    let w = weights(cfg, &data.y, mask);
    let out = train_sag_weighted(&data, Some(&w), train)?;
    Ok((out.theta, out.epochs))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs the configured experiment. A protocol abort is reported in
/// [`RunReport::abort`] together with everything computed before it.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    if cfg.mode == Mode::Theory {
        return Err(PipelineError::Config("theory mode produces a theory report; use run_theory".into()));
    }
    let mut timings = Vec::new();
    let prep = prepare(cfg, &mut timings)?;
    let (split, link) = (&prep.split, &prep.linkage);
    let n = link.len();
    let train = train_config(cfg, n)?;
    let (error, recall) = linkage_quality(split, link);

    let (ta, tb, true_mask) = perfectly_linked(split, link);
    let start = Instant::now();
    let (theta_base, _) = train_plain(cfg, &ta, &tb, &true_mask, &train)?;
    let baseline = evaluate(&theta_base, &prep.test)?;
    timings.push(("baseline".into(), secs(start.elapsed())));

    let (a, b) = aligned(split, link);
    let mut report = RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        shared: cfg.shared,
        population: prep.population,
        test_rows: prep.test.n(),
        rows_a: split.a.y.len(),
        rows_b: split.b.x.nrows(),
        common: split.truth.common(),
        aligned: n,
        matches: link.matches(),
        match_error: error,
        match_recall: recall,
        holdout: train.holdout,
        batch: train.batch,
        baseline,
        result: None,
        epochs: 0,
        stopped_early: false,
        batch_leakage: None,
        traffic: None,
        transcript_clean: None,
        timings,
        abort: None,
    };

    let start = Instant::now();
    match cfg.mode {
        Mode::Plaintext => {
            let (theta, epochs) = train_plain(cfg, &a, &b, &link.mask, &train)?;
            report.result = Some(evaluate(&theta, &prep.test)?);
            report.epochs = epochs;
            report.timings.push(("train".into(), secs(start.elapsed())));
        }
        Mode::Secure => {
            let d_a = a.x.ncols();
            let params = SessionParams {
                session: cfg.seed,
                key_bits: cfg.key_bits,
                allow_insecure_key: cfg.allow_insecure_key,
                leakage_ceiling: cfg.leakage_ceiling,
                ..SessionParams::new(n, d_a, b.x.ncols(), train.clone())
            };
            let rec = Recorder::new();
            match run_session(&params, &link.mask, &a, &b, Some(&rec)) {
                Ok(out) => {
                    let c = out.coordinator;
                    report.result = Some(evaluate(&c.theta, &prep.test)?);
                    report.epochs = c.epochs;
                    report.stopped_early = c.stopped_early;
                    report.batch_leakage = Some(c.batch_leakage);
                    let transcript = rec.transcript();
                    let (grad, loss) = ciphertexts_per_epoch(&transcript, c.epochs);
                    report.traffic = Some(Traffic {
                        gradient_per_epoch: grad,
                        gradient_bound: gradient_traffic_bound(n - train.holdout, train.batch, params.d()),
                        loss_per_epoch: loss,
                        loss_expected: train.holdout + 2,
                    });
                    report.transcript_clean = Some(audit_transcript(&transcript, &a, &b, &link.mask).clean());
                }
                Err(failure) => report.abort = Some(failure.error.to_string()),
            }
            let total = secs(start.elapsed());
            report.timings.push(("train".into(), total));
            if report.epochs > 0 {
                report.timings.push(("per_epoch".into(), total / report.epochs as f64));
            }
        }
        Mode::Theory => unreachable!("handled above"),
    }
    Ok(report)
}
