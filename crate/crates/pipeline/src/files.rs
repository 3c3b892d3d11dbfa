// SPDX-License-Identifier: Apache-2.0

//! File formats of the command-line tool: provider views, CLK lists,
//! linkages and keys.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_bigint::BigUint;
use vfl_clk::{Clk, Linkage};
use vfl_he::{PrivateKey, PublicKey};

use nalgebra::DMatrix;
use vfl_clk::Record;

use crate::config::{parse_kv, RunConfig};
use crate::error::{PipelineError, Result};
use crate::run::Views;

/// CSV with columns `row,clk`; the CLK is base64 of its byte encoding.
pub fn write_clks(path: impl AsRef<Path>, clks: &[Clk]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "clk"])?;
    for (i, c) in clks.iter().enumerate() {
        w.write_record([i.to_string(), STANDARD.encode(c.to_bytes())])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_clks(path: impl AsRef<Path>) -> Result<Vec<Clk>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad(i, "row"))?;
        if row != i {
            return Err(PipelineError::Data(format!("CLK row {row} out of order at line {}", i + 2)));
        }
        let bytes = STANDARD.decode(rec.get(1).ok_or_else(|| bad(i, "clk"))?).map_err(|_| bad(i, "clk"))?;
        out.push(Clk::from_bytes(&bytes)?);
    }
    Ok(out)
}

fn bad(i: usize, what: &str) -> PipelineError {
    PipelineError::Data(format!("line {}: bad {what}", i + 2))
}

/// CSV with columns `sigma,tau,mask,score`.
pub fn write_linkage(path: impl AsRef<Path>, link: &Linkage) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sigma", "tau", "mask", "score"])?;
    for k in 0..link.len() {
        w.write_record([
            link.sigma[k].to_string(),
            link.tau[k].to_string(),
            u8::from(link.mask[k]).to_string(),
            format!("{:.6}", link.scores[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_linkage(path: impl AsRef<Path>) -> Result<Linkage> {
    let mut r = csv::Reader::from_path(path)?;
    let mut link = Linkage { sigma: Vec::new(), tau: Vec::new(), mask: Vec::new(), scores: Vec::new() };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize, what: &str| rec.get(j).ok_or_else(|| bad(i, what));
        link.sigma.push(field(0, "sigma")?.parse().map_err(|_| bad(i, "sigma"))?);
        link.tau.push(field(1, "tau")?.parse().map_err(|_| bad(i, "tau"))?);
        link.mask.push(match field(2, "mask")? {
            "1" => true,
            "0" => false,
            _ => return Err(bad(i, "mask")),
        });
        link.scores.push(field(3, "score")?.parse().map_err(|_| bad(i, "score"))?);
    }
    Ok(link)
}

fn hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

fn unhex(map: &std::collections::BTreeMap<String, String>, key: &str) -> Result<BigUint> {
    map.get(key)
        .and_then(|v| BigUint::parse_bytes(v.as_bytes(), 16))
        .ok_or_else(|| PipelineError::Data(format!("key file: missing or malformed {key}")))
}

/// Writes `<prefix>.pub` (`n = <hex>`) and `<prefix>.key` (`p`, `q`).
pub fn write_keypair(prefix: &str, sk: &PrivateKey) -> Result<()> {
    std::fs::write(format!("{prefix}.pub"), format!("n = {}\n", hex(sk.public_key().n())))?;
    std::fs::write(format!("{prefix}.key"), format!("p = {}\nq = {}\n", hex(sk.p()), hex(sk.q())))?;
    Ok(())
}

pub fn read_public_key(path: impl AsRef<Path>) -> Result<PublicKey> {
    let map = parse_kv(&std::fs::read_to_string(path)?)?;
    Ok(PublicKey::from_modulus(unhex(&map, "n")?)?)
}

pub fn read_private_key(path: impl AsRef<Path>) -> Result<PrivateKey> {
    let map = parse_kv(&std::fs::read_to_string(path)?)?;
    Ok(PrivateKey::from_primes(unhex(&map, "p")?, unhex(&map, "q")?)?)
}

fn label(y: f64) -> String {
    (if y > 0.0 { "1" } else { "0" }).to_string()
}

fn write_rows(
    path: &Path,
    header: Vec<String>,
    pi: Option<(&[String], &[Record])>,
    x: &DMatrix<f64>,
    y: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut row: Vec<String> = match pi {
            Some((cols, records)) => cols.iter().map(|c| records[i].get(c).cloned().unwrap_or_default()).collect(),
            None => Vec::new(),
        };
        row.extend(x.row(i).iter().map(|v| v.to_string()));
        if let Some(y) = y {
            row.push(label(y[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `a.csv` (identifiers, A features, label as 1/0), `b.csv`
/// (identifiers, B features), `test.csv` (all features and the label of the
/// held-out entities) and `truth.csv` (entity id of every view row, for
/// scoring a linkage; never given to a provider) into `dir`.
pub fn write_views(dir: impl AsRef<Path>, cfg: &RunConfig, views: &Views) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let (a, b) = (&views.split.a, &views.split.b);
    let cols = |extra: &[String], label: bool| -> Vec<String> {
        let mut h: Vec<String> = cfg.pi.iter().chain(extra).cloned().collect();
        if label {
            h.push(cfg.label.clone());
        }
        h
    };
    write_rows(&dir.join("a.csv"), cols(&cfg.features_a, true), Some((&cfg.pi, &a.pi)), &a.x, Some(&a.y))?;
    write_rows(&dir.join("b.csv"), cols(&cfg.features_b, false), Some((&cfg.pi, &b.pi)), &b.x, None)?;
    let pop = &views.population;
    let ids = &views.test_ids;
    let x = vfl_learn::hstack(&pop.xa.select_rows(ids), &pop.xb.select_rows(ids));
    let y: Vec<f64> = ids.iter().map(|&i| pop.y[i]).collect();
    let mut header: Vec<String> = cfg.features_a.iter().chain(&cfg.features_b).cloned().collect();
    header.push(cfg.label.clone());
    write_rows(&dir.join("test.csv"), header, None, &x, Some(&y))?;
    let mut w = csv::Writer::from_path(dir.join("truth.csv"))?;
    w.write_record(["view", "row", "entity"])?;
    for (view, ids) in [("a", &views.split.truth.a), ("b", &views.split.truth.b)] {
        for (r, e) in ids.iter().enumerate() {
            w.write_record([view.to_string(), r.to_string(), e.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
