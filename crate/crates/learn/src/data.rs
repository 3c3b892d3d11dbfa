// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{LearnError, Result};

/// Examples in rows, labels in {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(LearnError::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(LearnError::Data("dataset needs at least one row and one column".into()));
        }
        if let Some(bad) = y.iter().find(|v| v.abs() != 1.0) {
            return Err(LearnError::Data(format!("label {bad} is not -1 or +1")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::Data("non-finite feature value".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        Dataset::new(self.x.select_rows(rows), rows.iter().map(|&i| self.y[i]).collect())
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Column-wise concatenation `[a | b]`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "row counts differ");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Raw CSV contents with a header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Table> {
        let mut rdr = csv::Reader::from_path(path)?;
        Self::from_reader(&mut rdr)
    }

    pub fn from_csv_str(text: &str) -> Result<Table> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        Self::from_reader(&mut rdr)
    }

    fn from_reader<R: std::io::Read>(rdr: &mut csv::Reader<R>) -> Result<Table> {
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| LearnError::Data(format!("no column named {name:?}")))
    }

    /// Numeric matrix of the named columns.
    pub fn numeric(&self, columns: &[String]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = columns.iter().map(|c| self.column(c)).collect::<Result<_>>()?;
        let mut x = DMatrix::zeros(self.rows.len(), idx.len());
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                x[(i, j)] = row[c].trim().parse().map_err(|_| {
                    LearnError::Data(format!("row {i}, column {:?}: {:?} is not a number", columns[j], row[c]))
                })?;
            }
        }
        Ok(x)
    }

    pub fn labels(&self, column: &str, rule: &LabelRule) -> Result<Vec<f64>> {
        let c = self.column(column)?;
        self.rows.iter().map(|r| rule.apply(&r[c])).collect()
    }

    /// Dataset from a label column and feature columns.
    pub fn to_dataset(&self, label: &str, features: &[String], rule: &LabelRule) -> Result<Dataset> {
        Dataset::new(self.numeric(features)?, self.labels(label, rule)?)
    }
}

/// How raw label strings map to {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelRule {
    /// `1`, `+1`, `true`, `yes` are positive; `0`, `-1`, `false`, `no` negative.
    Binary,
    /// One class against the rest (multiclass sources).
    OneVsRest(String),
    /// Numeric target above a threshold (regression sources).
    Above(f64),
}

impl LabelRule {
    pub fn apply(&self, raw: &str) -> Result<f64> {
        let v = raw.trim();
        match self {
            LabelRule::Binary => match v.to_ascii_lowercase().as_str() {
                "1" | "+1" | "1.0" | "true" | "yes" => Ok(1.0),
                "0" | "-1" | "0.0" | "-1.0" | "false" | "no" => Ok(-1.0),
                _ => Err(LearnError::Data(format!("label {v:?} is not binary"))),
            },
            LabelRule::OneVsRest(class) => Ok(if v == class { 1.0 } else { -1.0 }),
            LabelRule::Above(t) => {
                let x: f64 = v.parse().map_err(|_| LearnError::Data(format!("label {v:?} is not numeric")))?;
                Ok(if x > *t { 1.0 } else { -1.0 })
            }
        }
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Statistics over the given rows only. Constant columns keep scale 1.
    pub fn fit(x: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(LearnError::Data("cannot standardize on zero rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; x.ncols()];
        let mut scale = vec![1.0; x.ncols()];
        for j in 0..x.ncols() {
            let m = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / n;
            let var = rows.iter().map(|&i| (x[(i, j)] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, x: &mut DMatrix<f64>) {
        for j in 0..x.ncols() {
            for v in x.column_mut(j).iter_mut() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
    }
}

/// Samples `h` hold-out rows out of `n`; returns `(holdout, train)`, both sorted.
pub fn holdout_split(n: usize, h: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if h > n {
        return Err(LearnError::Config(format!("hold-out size {h} exceeds {n} rows")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut hold = idx[..h].to_vec();
    hold.sort_unstable();
    let mut in_hold = vec![false; n];
    for &i in &hold {
        in_hold[i] = true;
    }
    let train = (0..n).filter(|&i| !in_hold[i]).collect();
    Ok((hold, train))
}

/// Subsamples the majority class so both classes have equal counts.
pub fn balance_subsample(y: &[f64], rows: &[usize], seed: u64) -> Vec<usize> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| y[i] > 0.0);
    let k = pos.len().min(neg.len());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut out: Vec<usize> = pos[..k].iter().chain(&neg[..k]).copied().collect();
    out.sort_unstable();
    out
}

/// Per-row weights `n / (2 n_class)` that equalize the classes among `rows`;
/// rows outside the set get weight 0.
pub fn balance_weights(y: &[f64], rows: &[usize]) -> Vec<f64> {
    let pos = rows.iter().filter(|&&i| y[i] > 0.0).count() as f64;
    let neg = rows.len() as f64 - pos;
    let total = rows.len() as f64;
    let mut w = vec![0.0; y.len()];
    for &i in rows {
        let class = if y[i] > 0.0 { pos } else { neg };
        w[i] = total / (2.0 * class);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(Dataset::new(x.clone(), vec![1.0, -1.0]).is_ok());
        assert!(Dataset::new(x.clone(), vec![1.0]).is_err());
        assert!(Dataset::new(x, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn csv_ingest_and_labels() {
        let t = Table::from_csv_str("a,b,label\n1,2,yes\n3,4.5,no\n").unwrap();
        let ds = t.to_dataset("label", &["a".into(), "b".into()], &LabelRule::Binary).unwrap();
        assert_eq!(ds.y, vec![1.0, -1.0]);
        assert_eq!(ds.x[(1, 1)], 4.5);
        let t = Table::from_csv_str("f,class\n1,setosa\n2,virginica\n").unwrap();
        assert_eq!(t.labels("class", &LabelRule::OneVsRest("virginica".into())).unwrap(), vec![-1.0, 1.0]);
        assert!(t.labels("f", &LabelRule::Binary).is_err());
        assert_eq!(t.labels("f", &LabelRule::Above(1.5)).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn standardization_uses_training_rows() {
        let mut x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 3.0, 5.0, 5.0, 5.0, 100.0, 7.0]);
        let s = Standardizer::fit(&x, &[0, 1, 2]).unwrap();
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale[1], 1.0);
        s.transform(&mut x);
        let col: Vec<f64> = (0..3).map(|i| x[(i, 0)]).collect();
        let mean = col.iter().sum::<f64>() / 3.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn holdout_partitions() {
        let (h, t) = holdout_split(50, 10, 3).unwrap();
        assert_eq!(h.len(), 10);
        assert_eq!(t.len(), 40);
        let mut all: Vec<usize> = h.iter().chain(&t).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(holdout_split(50, 10, 3).unwrap().0, h);
        assert!(holdout_split(5, 6, 0).is_err());
    }

    #[test]
    fn balancing() {
        let y = vec![1.0, -1.0, -1.0, -1.0, 1.0, -1.0];
        let rows: Vec<usize> = (0..6).collect();
        let b = balance_subsample(&y, &rows, 1);
        assert_eq!(b.len(), 4);
        assert_eq!(b.iter().filter(|&&i| y[i] > 0.0).count(), 2);
        let w = balance_weights(&y, &rows);
        let wp: f64 = (0..6).filter(|&i| y[i] > 0.0).map(|i| w[i]).sum();
        let wn: f64 = (0..6).filter(|&i| y[i] < 0.0).map(|i| w[i]).sum();
        assert!((wp - wn).abs() < 1e-12);
    }
}
