use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    normalize_rewards, DatasetHeader, GenerationMode, PairEntry, PreferenceDataset, Rewards,
    SyntheticUser, UserRecord, DEFAULT_PAIRS_PER_USER, DEFAULT_REPEATS,
};
use crate::data::ItemCatalog;
use crate::error::{Error, Result};
use crate::oracle::{prefer_balanced, Candidate, PreferenceOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationOptions {
    /// Times each ordered pair is asked.
    pub repeats: u32,
    pub seed: u64,
    /// Sparse mode only.
    pub pairs_per_user: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            seed: 0,
            pairs_per_user: DEFAULT_PAIRS_PER_USER,
        }
    }
}

/// Independent stream per user so results do not depend on scheduling.
fn user_rng(seed: u64, user: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user);
    rng
}

struct UserOutcome {
    record: Option<UserRecord>,
    failed: u64,
}

fn assemble(
    header: DatasetHeader,
    outcomes: Vec<UserOutcome>,
) -> PreferenceDataset {
    let mut header = header;
    let mut records = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        header.failed_queries += o.failed;
        match o.record {
            Some(r) => records.push(r),
            None => header.dropped_users += 1,
        }
    }
    if header.dropped_users > 0 {
        tracing::warn!(dropped = header.dropped_users, "users dropped because every query failed");
    }
    PreferenceDataset { header, records }
}

/// Dense generation: every unordered arm pair is asked in both orders
/// `repeats` times, and each arm's reward is its win rate.
pub fn generate_dense(
    users: &[SyntheticUser],
    arm_contents: &[String],
    oracle: &dyn PreferenceOracle,
    options: GenerationOptions,
) -> Result<PreferenceDataset> {
    let k = arm_contents.len();
    if k < 2 {
        return Err(Error::Config(format!("dense generation needs at least 2 arms, got {k}")));
    }
    if options.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let outcomes = users
        .par_iter()
        .map(|user| -> Result<UserOutcome> {
            let mut rng = user_rng(options.seed, user.id);
            let mut wins = vec![0u64; k];
            let mut comparisons = vec![0u64; k];
            let mut failed = 0;
            for a in 0..k {
                for b in a + 1..k {
                    let out = prefer_balanced(
                        oracle,
                        user.id,
                        &user.persona,
                        Candidate { id: a, text: &arm_contents[a] },
                        Candidate { id: b, text: &arm_contents[b] },
                        options.repeats,
                        &mut rng,
                    )?;
                    wins[a] += out.wins_a;
                    wins[b] += out.wins_b;
                    comparisons[a] += out.answered();
                    comparisons[b] += out.answered();
                    failed += out.failed;
                }
            }
            if comparisons.iter().all(|&c| c == 0) {
                tracing::warn!(user = user.id, "every preference query failed; dropping user");
                return Ok(UserOutcome { record: None, failed });
            }
            let normalized = normalize_rewards(&wins, &comparisons)?;
            if !normalized.unobserved.is_empty() {
                tracing::warn!(user = user.id, arms = ?normalized.unobserved, "arms never compared");
            }
            Ok(UserOutcome {
                record: Some(UserRecord {
                    user: user.clone(),
                    rewards: Rewards::Dense {
                        rewards: normalized.rewards,
                        wins,
                        comparisons,
                    },
                }),
                failed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let header = DatasetHeader {
        mode: GenerationMode::Dense,
        arms: k,
        catalog_id: None,
        repeats: options.repeats,
        seed: options.seed,
        oracle: oracle.id(),
        pairs_per_user: None,
        failed_queries: 0,
        dropped_users: 0,
        provenance: Default::default(),
    };
    Ok(assemble(header, outcomes))
}

/// Maps a rank in `0..n(n-1)/2` to the unordered pair `(i, j)`, `i < j`.
fn unrank_pair(mut r: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while r >= n - 1 - i {
        r -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + r)
}

/// Sparse generation: per user, `pairs_per_user` distinct unordered item
/// pairs are drawn without replacement and asked in both orders.
pub fn generate_sparse(
    users: &[SyntheticUser],
    catalog: &ItemCatalog,
    oracle: &dyn PreferenceOracle,
    options: GenerationOptions,
) -> Result<PreferenceDataset> {
    let n = catalog.len();
    if n < 2 {
        return Err(Error::Config(format!("sparse generation needs at least 2 items, got {n}")));
    }
    let total = n * (n - 1) / 2;
    if options.pairs_per_user == 0 || options.pairs_per_user > total {
        return Err(Error::Config(format!(
            "pairs_per_user must be in 1..={total}, got {}",
            options.pairs_per_user
        )));
    }
    sparse_with(users, catalog, oracle, options, |_, rng| {
        index::sample(rng, total, options.pairs_per_user)
            .iter()
            .map(|r| unrank_pair(r, n))
            .collect()
    })
}

/// Sparse generation over given pairs: `pairs[u]` are the item pairs asked
/// of `users[u]`, e.g. the profiles a survey respondent actually saw.
pub fn generate_sparse_on_pairs(
    users: &[SyntheticUser],
    catalog: &ItemCatalog,
    oracle: &dyn PreferenceOracle,
    pairs: &[Vec<(usize, usize)>],
    options: GenerationOptions,
) -> Result<PreferenceDataset> {
    if pairs.len() != users.len() {
        return Err(Error::Config(format!(
            "{} pair lists for {} users",
            pairs.len(),
            users.len()
        )));
    }
    for list in pairs {
        for &(i, j) in list {
            if i == j || i.max(j) >= catalog.len() {
                return Err(Error::Config(format!("invalid item pair ({i}, {j})")));
            }
        }
    }
    let mut dataset = sparse_with(users, catalog, oracle, options, |u, _| pairs[u].clone())?;
    dataset.header.pairs_per_user = None;
    Ok(dataset)
}

fn sparse_with<F>(
    users: &[SyntheticUser],
    catalog: &ItemCatalog,
    oracle: &dyn PreferenceOracle,
    options: GenerationOptions,
    draw: F,
) -> Result<PreferenceDataset>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<(usize, usize)> + Sync,
{
    let n = catalog.len();
    if options.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let texts: Vec<String> = (0..n)
        .map(|i| catalog.describe(i).expect("index within catalog"))
        .collect();
    let outcomes = users
        .par_iter()
        .enumerate()
        .map(|(u, user)| -> Result<UserOutcome> {
            let mut rng = user_rng(options.seed, user.id);
            let pairs = draw(u, &mut rng);
            let mut entries: Vec<PairEntry> = Vec::with_capacity(2 * pairs.len());
            let mut failed = 0;
            for (i, j) in pairs {
                let out = prefer_balanced(
                    oracle,
                    user.id,
                    &user.persona,
                    Candidate { id: i, text: &texts[i] },
                    Candidate { id: j, text: &texts[j] },
                    options.repeats,
                    &mut rng,
                )?;
                failed += out.failed;
                let answered = out.answered();
                if answered == 0 {
                    continue;
                }
                entries.push(PairEntry {
                    first: i,
                    second: j,
                    fraction: out.wins_a as f64 / answered as f64,
                });
                entries.push(PairEntry {
                    first: j,
                    second: i,
                    fraction: out.wins_b as f64 / answered as f64,
                });
            }
            if entries.is_empty() {
                tracing::warn!(user = user.id, "every preference query failed; dropping user");
                return Ok(UserOutcome { record: None, failed });
            }
            entries.sort_by_key(|e| (e.first, e.second));
            // A pair shown twice keeps its first answer.
            entries.dedup_by_key(|e| (e.first, e.second));
            Ok(UserOutcome {
                record: Some(UserRecord {
                    user: user.clone(),
                    rewards: Rewards::Sparse { entries },
                }),
                failed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let header = DatasetHeader {
        mode: GenerationMode::Sparse,
        arms: n,
        catalog_id: Some(catalog.id()),
        repeats: options.repeats,
        seed: options.seed,
        oracle: oracle.id(),
        pairs_per_user: Some(options.pairs_per_user),
        failed_queries: 0,
        dropped_users: 0,
        provenance: Default::default(),
    };
    Ok(assemble(header, outcomes))
}
