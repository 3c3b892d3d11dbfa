// SPDX-License-Identifier: Apache-2.0

//! Three-party secure logistic regression on vertically partitioned data.
//!
//! A coordinator holds the Paillier private key and the linkage mask; provider
//! A holds features and labels, provider B holds further features. Parties
//! exchange framed messages over links and the coordinator decrypts only
//! masked gradients and the masked hold-out loss.

mod audit;
mod error;
mod message;
mod ops;
mod party;
mod session;
mod transport;

pub use audit::{audit_batch_leakage, hypergeometric_cdf_exact, ratio_to_f64};
pub use error::{ProtocolError, Result};
pub use message::{Frame, Kind, Message, Purpose, HEADER_LEN, MAX_FRAME};
pub use ops::{
    encrypt_mask, gradient_b, gradient_partial_a, gradient_parts_a, holdout_init_a, holdout_init_b, loss_partial_a,
    loss_total_b,
};
pub use party::{
    run_coordinator, run_provider_a, run_provider_b, CoordinatorOutput, Failure, GradientRecord, LossRecord, PartyRole,
    ProviderAData, ProviderBData, ProviderReport, SessionParams, Trace,
};
pub use session::{
    audit_transcript, ciphertexts_per_epoch, compare_with_oracle, gradient_traffic_bound, joined, mask_weights,
    masked_gradient_sum, masked_holdout_loss, oracle_config, relative_error, run_session, OracleReport, SessionOutput,
    VisibilityReport,
};
pub use transport::{
    channel_pair, in_process_mesh, tcp_endpoint, ChannelLink, Endpoint, Link, Record, Recorder, TcpAddrs, TcpLink,
    Transcript,
};
