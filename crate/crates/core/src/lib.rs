//! Federated heavy-hitter identification under ε-local differential privacy.
//!
//! The crate is organised bottom-up:
//!
//! * [`prefix_codec`] – fixed-width item codes and trie-level prefix arithmetic.
//! * [`oracles`] – the k-RR, OUE and OLH frequency oracles.
//! * [`extension`] – adaptive extension numbers (anchor plus drift distance).
//! * [`protocol`] – user grouping, per-level estimation, the shared shallow
//!   trie, TAP, single-party PEM and the FedPEM baseline.
//! * [`pruning`] – TAPS: sequential estimation with consensus-based pruning.
//! * [`datagen`] – synthetic multi-party data, party-file ingestion and exact
//!   ground truth.
//! * [`metrics`] – F1, NCR and average local recall.
//! * [`runner`] – experiment configuration, repetition, cost accounting and
//!   CSV output.

pub mod datagen;
pub mod error;
pub mod extension;
pub mod metrics;
pub mod oracles;
pub mod prefix_codec;
pub mod protocol;
pub mod pruning;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
pub use oracles::{OracleConfig, OracleKind, OracleReport};
pub use prefix_codec::{CandidateDomain, PrefixCode};
pub use protocol::{ExtensionPolicy, Party, ProtocolParams};
pub use seed::RunSeed;
