// SPDX-License-Identifier: Apache-2.0

//! Run configuration: `key = value` text with command-line overrides.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vfl_clk::ClkConfig;
use vfl_he::MIN_SECURE_BITS;
use vfl_learn::{LabelRule, LossKind, TrainConfig};

use crate::error::{PipelineError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Three-party encrypted training.
    Secure,
    /// The same masked SAG run in plaintext.
    Plaintext,
    /// Numerical checks of the entity-resolution bounds.
    Theory,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "secure" => Ok(Mode::Secure),
            "plaintext" | "plaintext-oracle" => Ok(Mode::Plaintext),
            "theory" => Ok(Mode::Theory),
            _ => Err(PipelineError::Config(format!("mode {s:?}: expected secure, plaintext or theory"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Secure => "secure",
            Mode::Plaintext => "plaintext",
            Mode::Theory => "theory",
        }
    }
}

/// How provider A balances its training rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Balance {
    None,
    /// Drops majority-class rows until both classes have equal counts.
    Subsample,
    /// Class weights `n / (2 n_class)`; plaintext mode only.
    Weights,
}

impl Balance {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Balance::None),
            "subsample" => Ok(Balance::Subsample),
            "weights" => Ok(Balance::Weights),
            _ => Err(PipelineError::Config(format!("balance {s:?}: expected none, subsample or weights"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Balance::None => "none",
            Balance::Subsample => "subsample",
            Balance::Weights => "weights",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Generated credit-scoring population with this many entities.
    Synthetic {
        rows: usize,
    },
    Csv(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: DataSource,
    pub label: String,
    pub label_rule: LabelRule,
    /// Personal-identifier columns, hashed into CLKs.
    pub pi: Vec<String>,
    pub features_a: Vec<String>,
    pub features_b: Vec<String>,
    /// Share of entities kept aside for evaluation.
    pub test_fraction: f64,
    /// Share of entities common to both providers.
    pub shared: f64,
    /// Rows per provider view; `None` uses the largest feasible size.
    pub view_rows: Option<usize>,
    pub typo_rate: f64,
    pub missing_rate: f64,
    pub clk: ClkConfig,
    /// Dice threshold for candidate pairs.
    pub threshold: f64,
    pub train: TrainConfig,
    /// Hold-out share of the aligned rows.
    pub holdout_fraction: f64,
    pub key_bits: u64,
    pub allow_insecure_key: bool,
    pub leakage_ceiling: Option<f64>,
    pub balance: Balance,
    pub mode: Mode,
    pub seed: u64,
    pub theory_instances: usize,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| (*s).to_string()).collect()
}

pub const CREDIT_PI: [&str; 4] = ["given_name", "surname", "dob", "address"];
pub const CREDIT_FEATURES_A: [&str; 4] = ["credit_lines", "utilization", "late_payments", "debt_ratio"];
pub const CREDIT_FEATURES_B: [&str; 4] = ["age", "income", "months_employed", "savings"];
pub const CREDIT_LABEL: &str = "default";

impl Default for RunConfig {
    fn default() -> Self {
        let pi = strings(&CREDIT_PI);
        RunConfig {
            source: DataSource::Synthetic { rows: 5000 },
            label: CREDIT_LABEL.into(),
            label_rule: LabelRule::Binary,
            clk: ClkConfig::new(pi.clone(), "vfl-shared-secret"),
            pi,
            features_a: strings(&CREDIT_FEATURES_A),
            features_b: strings(&CREDIT_FEATURES_B),
            test_fraction: 0.2,
            shared: 1.0,
            view_rows: None,
            typo_rate: 0.03,
            missing_rate: 0.005,
            threshold: 0.9,
            train: TrainConfig { batch: 64, max_epochs: 40, patience: 5, min_delta: 1e-6, ..TrainConfig::default() },
            holdout_fraction: 0.1,
            key_bits: MIN_SECURE_BITS,
            allow_insecure_key: false,
            leakage_ceiling: None,
            balance: Balance::Subsample,
            mode: Mode::Secure,
            seed: 0,
            theory_instances: 100,
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| PipelineError::Config(format!("{key}: cannot parse {v:?}")))
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn fraction(key: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(PipelineError::Config(format!("{key} = {v} is outside [0, 1]")))
    }
}

pub fn parse_label_rule(v: &str) -> Result<LabelRule> {
    if v == "binary" {
        return Ok(LabelRule::Binary);
    }
    if let Some(c) = v.strip_prefix("class:") {
        return Ok(LabelRule::OneVsRest(c.to_string()));
    }
    if let Some(t) = v.strip_prefix("above:") {
        return Ok(LabelRule::Above(parse("data.label_rule", t)?));
    }
    Err(PipelineError::Config(format!("data.label_rule {v:?}: expected binary, class:<name> or above:<number>")))
}

fn label_rule_text(r: &LabelRule) -> String {
    match r {
        LabelRule::Binary => "binary".into(),
        LabelRule::OneVsRest(c) => format!("class:{c}"),
        LabelRule::Above(t) => format!("above:{t}"),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&parse_kv(text)?)?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        RunConfig::from_text(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides such as `--set shared=0.66`.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        let mut map = BTreeMap::new();
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override {o:?}: expected key=value")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        self.apply(&map)
    }

    /// Sets every key in `map`; unknown keys are rejected.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        let mut clk_keys = HashMap::new();
        for (k, v) in map {
            let k = k.as_str();
            match k {
                "data.path" => {
                    self.source = if v.is_empty() {
                        DataSource::Synthetic { rows: 5000 }
                    } else {
                        DataSource::Csv(PathBuf::from(v))
                    }
                }
                "data.rows" => self.source = DataSource::Synthetic { rows: parse(k, v)? },
                "data.label" => self.label = v.clone(),
                "data.label_rule" => self.label_rule = parse_label_rule(v)?,
                "data.pi" => self.pi = list(v),
                "data.features_a" => self.features_a = list(v),
                "data.features_b" => self.features_b = list(v),
                "data.test_fraction" => self.test_fraction = fraction(k, parse(k, v)?)?,
                "split.shared" | "shared" => self.shared = fraction(k, parse(k, v)?)?,
                "split.rows" => self.view_rows = if v.is_empty() { None } else { Some(parse(k, v)?) },
                "corrupt.typo_rate" => self.typo_rate = fraction(k, parse(k, v)?)?,
                "corrupt.missing_rate" => self.missing_rate = fraction(k, parse(k, v)?)?,
                "match.threshold" => self.threshold = fraction(k, parse(k, v)?)?,
                "train.eta" => self.train.eta = parse(k, v)?,
                "train.gamma" => self.train.gamma = parse(k, v)?,
                "train.batch" => self.train.batch = parse(k, v)?,
                "train.holdout_fraction" => self.holdout_fraction = fraction(k, parse(k, v)?)?,
                "train.patience" => self.train.patience = parse(k, v)?,
                "train.min_delta" => self.train.min_delta = parse(k, v)?,
                "train.max_epochs" => self.train.max_epochs = parse(k, v)?,
                "train.loss" => {
                    self.train.loss = match v.as_str() {
                        "taylor" => LossKind::Taylor,
                        "logistic" => LossKind::Logistic,
                        _ => {
                            return Err(PipelineError::Config(format!("train.loss {v:?}: expected taylor or logistic")))
                        }
                    }
                }
                "key.bits" => self.key_bits = parse(k, v)?,
                "key.allow_insecure" => self.allow_insecure_key = parse(k, v)?,
                "audit.leakage_ceiling" => {
                    self.leakage_ceiling = if v.is_empty() { None } else { Some(fraction(k, parse(k, v)?)?) }
                }
                "balance" => self.balance = Balance::parse(v)?,
                "mode" => self.mode = Mode::parse(v)?,
                "seed" => self.seed = parse(k, v)?,
                "theory.instances" => self.theory_instances = parse(k, v)?,
                _ if k.starts_with("clk.") => {
                    clk_keys.insert(k.to_string(), v.clone());
                }
                _ => return Err(PipelineError::Config(format!("unknown key {k:?}"))),
            }
        }
        if !clk_keys.is_empty() || map.contains_key("data.pi") {
            clk_keys.entry("clk.fields".into()).or_insert_with(|| self.pi.join(","));
            clk_keys.entry("clk.secret".into()).or_insert_with(|| self.clk.secret.clone());
            for (key, value) in [("clk.l", self.clk.l), ("clk.k", self.clk.k), ("clk.ngram", self.clk.n)] {
                clk_keys.entry(key.into()).or_insert_with(|| value.to_string());
            }
            self.clk = ClkConfig::from_kv(&clk_keys)?;
        }
        self.train.seed = self.seed;
        Ok(())
    }

    /// Checks the configuration against a table header: the two feature
    /// lists and the identifier and label columns partition the header.
    pub fn validate_columns(&self, header: &[String]) -> Result<()> {
        let mut seen: HashMap<&str, &str> = HashMap::new();
        let roles = [("identifier", &self.pi), ("feature_a", &self.features_a), ("feature_b", &self.features_b)];
        for (role, cols) in roles {
            for c in cols.iter() {
                if let Some(prev) = seen.insert(c, role) {
                    return Err(PipelineError::Config(format!("column {c:?} is both {prev} and {role}")));
                }
            }
        }
        if let Some(prev) = seen.insert(&self.label, "label") {
            return Err(PipelineError::Config(format!("label column {:?} is also {prev}", self.label)));
        }
        for h in header {
            if !seen.contains_key(h.as_str()) {
                return Err(PipelineError::Config(format!("column {h:?} is assigned to no role")));
            }
        }
        for c in seen.keys() {
            if !header.iter().any(|h| h == c) {
                return Err(PipelineError::Config(format!("column {c:?} is not in the data")));
            }
        }
        if self.features_a.is_empty() || self.features_b.is_empty() {
            return Err(PipelineError::Config("each provider needs at least one feature".into()));
        }
        if self.clk.fields != self.pi {
            return Err(PipelineError::Config("clk.fields must list the identifier columns".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.test_fraction >= 1.0 {
            return Err(PipelineError::Config("data.test_fraction must leave training entities".into()));
        }
        if self.holdout_fraction <= 0.0 || self.holdout_fraction >= 1.0 {
            return Err(PipelineError::Config("train.holdout_fraction must be in (0, 1)".into()));
        }
        if self.mode == Mode::Secure && self.balance == Balance::Weights {
            return Err(PipelineError::Config("class weights are not available in secure mode".into()));
        }
        if self.mode == Mode::Secure && self.train.loss != LossKind::Taylor {
            return Err(PipelineError::Config("secure mode trains the Taylor loss only".into()));
        }
        if self.key_bits < MIN_SECURE_BITS && !self.allow_insecure_key {
            return Err(PipelineError::Config(format!("key.bits {} is below {MIN_SECURE_BITS}", self.key_bits)));
        }
        Ok(())
    }

    /// The full configuration as `key = value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        match &self.source {
            DataSource::Synthetic { rows } => {
                let _ = writeln!(s, "data.path =\ndata.rows = {rows}");
            }
            DataSource::Csv(p) => {
                let _ = writeln!(s, "data.path = {}", p.display());
            }
        }
        let lines = [
            ("data.label", self.label.clone()),
            ("data.label_rule", label_rule_text(&self.label_rule)),
            ("data.pi", self.pi.join(",")),
            ("data.features_a", self.features_a.join(",")),
            ("data.features_b", self.features_b.join(",")),
            ("data.test_fraction", self.test_fraction.to_string()),
            ("split.shared", self.shared.to_string()),
            ("split.rows", self.view_rows.map(|r| r.to_string()).unwrap_or_default()),
            ("corrupt.typo_rate", self.typo_rate.to_string()),
            ("corrupt.missing_rate", self.missing_rate.to_string()),
            ("match.threshold", self.threshold.to_string()),
            ("train.eta", self.train.eta.to_string()),
            ("train.gamma", self.train.gamma.to_string()),
            ("train.batch", self.train.batch.to_string()),
            ("train.holdout_fraction", self.holdout_fraction.to_string()),
            ("train.patience", self.train.patience.to_string()),
            ("train.min_delta", self.train.min_delta.to_string()),
            ("train.max_epochs", self.train.max_epochs.to_string()),
            ("train.loss", if self.train.loss == LossKind::Taylor { "taylor" } else { "logistic" }.to_string()),
            ("key.bits", self.key_bits.to_string()),
            ("key.allow_insecure", self.allow_insecure_key.to_string()),
            ("audit.leakage_ceiling", self.leakage_ceiling.map(|c| c.to_string()).unwrap_or_default()),
            ("balance", self.balance.name().to_string()),
            ("mode", self.mode.name().to_string()),
            ("seed", self.seed.to_string()),
            ("theory.instances", self.theory_instances.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s.push_str(&self.clk.to_kv());
        s
    }
}
