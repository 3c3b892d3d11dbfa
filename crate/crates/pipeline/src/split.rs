// SPDX-License-Identifier: Apache-2.0

//! Populations of entities and their vertical split into two provider views.
//!
//! Entity ids are row indices into the [`Population`]. They are kept in a
//! [`GroundTruth`] next to the views and never enter a view.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vfl_clk::Record;
use vfl_learn::{balance_subsample, hstack, Dataset, Table};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};

/// Every entity with its identifiers, both feature blocks and its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub pi: Vec<Record>,
    pub xa: DMatrix<f64>,
    pub xb: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Population {
    pub fn from_table(table: &Table, cfg: &RunConfig) -> Result<Self> {
        cfg.validate_columns(&table.header)?;
        let cols: Vec<usize> = cfg.pi.iter().map(|c| table.column(c)).collect::<vfl_learn::Result<_>>()?;
        let pi = table
            .rows
            .iter()
            .map(|r| cfg.pi.iter().zip(&cols).map(|(name, &c)| (name.clone(), r[c].clone())).collect())
            .collect();
        Ok(Population {
            pi,
            xa: table.numeric(&cfg.features_a)?,
            xb: table.numeric(&cfg.features_b)?,
            y: table.labels(&cfg.label, &cfg.label_rule)?,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `[X_A | X_B]` and labels for the given entities.
    pub fn joined(&self, ids: &[usize]) -> Result<Dataset> {
        let x = hstack(&self.xa.select_rows(ids), &self.xb.select_rows(ids));
        Ok(Dataset::new(x, ids.iter().map(|&i| self.y[i]).collect())?)
    }
}

/// Provider A: identifiers, its feature block and the labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewA {
    pub pi: Vec<Record>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

/// Provider B: identifiers and its feature block.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewB {
    pub pi: Vec<Record>,
    pub x: DMatrix<f64>,
}

/// Entity id of every view row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl GroundTruth {
    /// Entities present in both views.
    pub fn common(&self) -> usize {
        let mut in_b = std::collections::HashSet::with_capacity(self.b.len());
        in_b.extend(self.b.iter().copied());
        self.a.iter().filter(|i| in_b.contains(i)).count()
    }

    /// For each row of A, the row of B holding the same entity.
    pub fn partner_of_a(&self) -> Vec<Option<usize>> {
        let pos: std::collections::HashMap<usize, usize> = self.b.iter().enumerate().map(|(j, &e)| (e, j)).collect();
        self.a.iter().map(|e| pos.get(e).copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub a: ViewA,
    pub b: ViewB,
    pub truth: GroundTruth,
}

impl Split {
    /// Keeps the rows of A at `rows`, in that order.
    pub fn retain_a(&mut self, rows: &[usize]) {
        self.a = ViewA {
            pi: rows.iter().map(|&i| self.a.pi[i].clone()).collect(),
            x: self.a.x.select_rows(rows),
            y: rows.iter().map(|&i| self.a.y[i]).collect(),
        };
        self.truth.a = rows.iter().map(|&i| self.truth.a[i]).collect();
    }

    /// Provider A subsamples its majority class; B is unchanged.
    pub fn balance_a(&mut self, seed: u64) {
        let all: Vec<usize> = (0..self.a.y.len()).collect();
        let keep = balance_subsample(&self.a.y, &all, seed);
        self.retain_a(&keep);
    }
}

/// `⌊f m⌋` with a tolerance for decimal fractions such as 0.66.
pub fn shared_count(shared: f64, rows: usize) -> usize {
    (shared * rows as f64 + 1e-9).floor() as usize
}

/// Entities needed for two views of `rows` rows sharing `⌊f rows⌋`.
pub fn entities_needed(shared: f64, rows: usize) -> usize {
    2 * rows - shared_count(shared, rows)
}

/// Largest view size a pool of `pool` entities supports.
pub fn max_view_rows(shared: f64, pool: usize) -> usize {
    let mut m = pool;
    while m > 0 && entities_needed(shared, m) > pool {
        m -= 1;
    }
    m
}

/// Splits the entities in `pool` into two views of `rows` rows each
/// (`None`: the largest feasible size). `⌊shared · rows⌋` entities appear in
/// both views; the other rows of each view hold entities unique to it. Rows
/// of the two views are shuffled independently.
pub fn vertical_split(pop: &Population, pool: &[usize], shared: f64, rows: Option<usize>, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&shared) {
        return Err(PipelineError::Config(format!("shared fraction {shared} is outside [0, 1]")));
    }
    let m = rows.unwrap_or_else(|| max_view_rows(shared, pool.len()));
    let needed = entities_needed(shared, m);
    if m == 0 || needed > pool.len() {
        return Err(PipelineError::Config(format!(
            "{m} rows per view with shared fraction {shared} need {needed} entities, only {} available",
            pool.len()
        )));
    }
    let common = shared_count(shared, m);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ids = pool.to_vec();
    ids.shuffle(&mut rng);
    let (both, rest) = ids.split_at(common);
    let (only_a, rest) = rest.split_at(m - common);
    let only_b = &rest[..m - common];
    let mut a: Vec<usize> = both.iter().chain(only_a).copied().collect();
    let mut b: Vec<usize> = both.iter().chain(only_b).copied().collect();
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    Ok(Split {
        a: ViewA {
            pi: a.iter().map(|&i| pop.pi[i].clone()).collect(),
            x: pop.xa.select_rows(&a),
            y: a.iter().map(|&i| pop.y[i]).collect(),
        },
        b: ViewB { pi: b.iter().map(|&i| pop.pi[i].clone()).collect(), x: pop.xb.select_rows(&b) },
        truth: GroundTruth { a, b },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn population(n: usize) -> Population {
        Population {
            pi: (0..n).map(|i| [("name".to_string(), format!("p{i}"))].into_iter().collect()).collect(),
            xa: DMatrix::from_fn(n, 2, |i, j| (i * 10 + j) as f64),
            xb: DMatrix::from_fn(n, 1, |i, _| -(i as f64)),
            y: (0..n).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect(),
        }
    }

    #[test]
    fn overlap_count_is_exact() {
        let pop = population(402);
        let pool: Vec<usize> = (0..402).collect();
        let s = vertical_split(&pop, &pool, 0.66, Some(300), 1).unwrap();
        assert_eq!(s.truth.common(), 198);
        assert_eq!((s.truth.a.len(), s.truth.b.len()), (300, 300));
        assert!(vertical_split(&pop, &pool[..401], 0.66, Some(300), 1).is_err());
    }

    #[test]
    fn extreme_fractions() {
        let pop = population(100);
        let pool: Vec<usize> = (0..100).collect();
        let full = vertical_split(&pop, &pool, 1.0, None, 2).unwrap();
        assert_eq!((full.truth.a.len(), full.truth.common()), (100, 100));
        assert_ne!(full.truth.a, full.truth.b, "views are shuffled independently");
        let none = vertical_split(&pop, &pool, 0.0, None, 2).unwrap();
        assert_eq!((none.truth.a.len(), none.truth.common()), (50, 0));
    }

    #[test]
    fn views_carry_their_entities_rows() {
        let pop = population(60);
        let pool: Vec<usize> = (10..60).collect();
        let s = vertical_split(&pop, &pool, 0.5, None, 3).unwrap();
        for (r, &e) in s.truth.a.iter().enumerate() {
            assert!(e >= 10);
            assert_eq!(s.a.x[(r, 1)], (e * 10 + 1) as f64);
            assert_eq!(s.a.y[r], pop.y[e]);
            assert_eq!(s.a.pi[r]["name"], format!("p{e}"));
        }
        for (r, &e) in s.truth.b.iter().enumerate() {
            assert_eq!(s.b.x[(r, 0)], -(e as f64));
        }
        let partner = s.truth.partner_of_a();
        for (r, p) in partner.iter().enumerate() {
            if let Some(j) = p {
                assert_eq!(s.truth.b[*j], s.truth.a[r]);
            }
        }
        assert_eq!(partner.iter().flatten().count(), s.truth.common());
    }

    #[test]
    fn feasible_sizes() {
        assert_eq!(max_view_rows(1.0, 500), 500);
        assert_eq!(max_view_rows(0.0, 500), 250);
        let m = max_view_rows(0.33, 4000);
        assert!(entities_needed(0.33, m) <= 4000 && entities_needed(0.33, m + 1) > 4000);
    }

    #[test]
    fn balancing_touches_only_a() {
        let pop = population(90);
        let pool: Vec<usize> = (0..90).collect();
        let mut s = vertical_split(&pop, &pool, 1.0, None, 4).unwrap();
        let b = s.b.clone();
        s.balance_a(5);
        let pos = s.a.y.iter().filter(|&&v| v > 0.0).count();
        assert_eq!((pos, s.a.y.len()), (30, 60));
        assert_eq!(s.b, b);
        for (r, &e) in s.truth.a.iter().enumerate() {
            assert_eq!(s.a.y[r], pop.y[e]);
        }
    }
}
