//! Synthetic preference generation: sample users, describe them as
//! personas, ask an oracle pairwise questions about them and turn the
//! answers into per-user rewards.

mod collect;
mod users;

pub use collect::{generate_dense, generate_sparse, generate_sparse_on_pairs, GenerationOptions};
pub use users::{render_persona, sample_users, SyntheticUser};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of times each ordered pair is asked.
pub const DEFAULT_REPEATS: u32 = 5;
/// Default number of sampled item pairs per user in sparse mode.
pub const DEFAULT_PAIRS_PER_USER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    Dense,
    Sparse,
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenerationMode::Dense => "dense",
            GenerationMode::Sparse => "sparse",
        })
    }
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(GenerationMode::Dense),
            "sparse" => Ok(GenerationMode::Sparse),
            other => Err(Error::Config(format!("unknown generation mode `{other}`"))),
        }
    }
}

/// One stored pairwise win fraction: how often `first` beat `second`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub first: usize,
    pub second: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rewards {
    Dense {
        rewards: Vec<f64>,
        wins: Vec<u64>,
        comparisons: Vec<u64>,
    },
    /// Entries sorted by `(first, second)`; both orientations of every
    /// answered pair are present and sum to one.
    Sparse { entries: Vec<PairEntry> },
}

impl Rewards {
    pub fn mode(&self) -> GenerationMode {
        match self {
            Rewards::Dense { .. } => GenerationMode::Dense,
            Rewards::Sparse { .. } => GenerationMode::Sparse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user: SyntheticUser,
    pub rewards: Rewards,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub mode: GenerationMode,
    /// Number of arms (dense) or catalog size (sparse).
    pub arms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_id: Option<String>,
    pub repeats: u32,
    pub seed: u64,
    pub oracle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs_per_user: Option<usize>,
    #[serde(default)]
    pub failed_queries: u64,
    #[serde(default)]
    pub dropped_users: u64,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

/// Output of preference generation: one reward record per kept user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub header: DatasetHeader,
    pub records: Vec<UserRecord>,
}

impl PreferenceDataset {
    pub fn mode(&self) -> GenerationMode {
        self.header.mode
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks mode consistency, reward bounds and shapes.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            match &r.rewards {
                Rewards::Dense {
                    rewards,
                    wins,
                    comparisons,
                } => {
                    if self.header.mode != GenerationMode::Dense {
                        return Err(Error::Internal(format!("user {} has dense rewards in a sparse dataset", r.user.id)));
                    }
                    if rewards.len() != self.header.arms
                        || wins.len() != self.header.arms
                        || comparisons.len() != self.header.arms
                    {
                        return Err(Error::Internal(format!("user {} reward length mismatch", r.user.id)));
                    }
                    if rewards.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::Internal(format!("user {} reward outside [0, 1]", r.user.id)));
                    }
                }
                Rewards::Sparse { entries } => {
                    if self.header.mode != GenerationMode::Sparse {
                        return Err(Error::Internal(format!("user {} has sparse rewards in a dense dataset", r.user.id)));
                    }
                    for e in entries {
                        if e.first == e.second
                            || e.first >= self.header.arms
                            || e.second >= self.header.arms
                            || !(0.0..=1.0).contains(&e.fraction)
                        {
                            return Err(Error::Internal(format!("user {} has an invalid pair entry", r.user.id)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Win rates from raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRewards {
    pub rewards: Vec<f64>,
    /// Arms that were never compared; their reward is 0.
    pub unobserved: Vec<usize>,
}

/// Each arm's reward is its wins divided by the comparisons it took part in.
pub fn normalize_rewards(wins: &[u64], comparisons: &[u64]) -> Result<NormalizedRewards> {
    if wins.len() != comparisons.len() {
        return Err(Error::Internal(format!(
            "{} win counts for {} comparison counts",
            wins.len(),
            comparisons.len()
        )));
    }
    let mut rewards = Vec::with_capacity(wins.len());
    let mut unobserved = Vec::new();
    for (k, (&w, &c)) in wins.iter().zip(comparisons).enumerate() {
        if w > c {
            return Err(Error::Internal(format!("arm {k} has {w} wins in {c} comparisons")));
        }
        if c == 0 {
            unobserved.push(k);
            rewards.push(0.0);
        } else {
            rewards.push(w as f64 / c as f64);
        }
    }
    Ok(NormalizedRewards { rewards, unobserved })
}
