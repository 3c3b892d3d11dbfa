// SPDX-License-Identifier: Apache-2.0

//! End-to-end vertical federated learning experiments: a synthetic credit
//! population with personal identifiers, corrupted identifiers, a vertical
//! split with controlled entity overlap, CLK entity resolution, secure or
//! plaintext training on the linkage and a perfectly linked baseline.

mod config;
mod corrupt;
mod credit;
mod error;
mod files;
mod parity;
mod report;
mod run;
mod split;
mod theory;

pub use config::{
    parse_kv, parse_label_rule, Balance, DataSource, Mode, RunConfig, CREDIT_FEATURES_A, CREDIT_FEATURES_B,
    CREDIT_LABEL, CREDIT_PI,
};
pub use corrupt::{corrupt_pi, typo};
pub use credit::{credit_header, credit_table, DEFAULT_RATE};
pub use error::{PipelineError, Result};
pub use files::{
    read_clks, read_linkage, read_private_key, read_public_key, write_clks, write_keypair, write_linkage, write_views,
};
pub use parity::{iris_dataset, loss_parity, parity_config, parity_suite, Parity, PARITY_FOLDS};
pub use report::{RunReport, Traffic};
pub use run::{
    aligned, linkage_quality, load_table, perfectly_linked, prepare, run, standardize_view, test_split, train_config,
    views, with_intercept, Prepared, Views,
};
pub use split::{
    entities_needed, max_view_rows, shared_count, vertical_split, GroundTruth, Population, Split, ViewA, ViewB,
};
pub use theory::{run_theory, TheoryRun, RECURRENCE_TOLERANCE};
