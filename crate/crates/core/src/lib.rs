//! Contextual bandits pre-trained on synthetic pairwise preferences.
//!
//! The pipeline: sample synthetic users ([`generate::sample_users`]), ask a
//! [`oracle::PreferenceOracle`] which of two contents each user prefers
//! ([`generate::generate_dense`], [`generate::generate_sparse`]), pre-train a
//! [`bandit::LinUcbModel`] on the resulting rewards ([`env::pretrain`]) and
//! measure how much regret the warm start saves against a cold start
//! ([`env::run_standard`], [`env::run_sleeping_replay`]).

pub mod bandit;
pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod oracle;
pub mod scenario;

pub use bandit::{ContextVector, FeatureVector, ItemFeatures, LinUcbModel, SleepingChoice};
pub use error::{Error, ErrorKind, Result};
pub use generate::{PreferenceDataset, SyntheticUser};
