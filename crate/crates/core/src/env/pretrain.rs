use rand::Rng;

use super::rng_for;
use crate::bandit::{
    encode_context_arm, encode_pairwise, select_sleeping, ContextVector, LinUcbModel,
};
use crate::data::{ContextEncoder, ItemCatalog};
use crate::error::{Error, Result};
use crate::generate::{GenerationMode, PreferenceDataset, Rewards};

/// Settings of one pre-training phase.
#[derive(Debug, Clone, Copy)]
pub struct Pretraining<'a> {
    pub steps: usize,
    pub seed: u64,
    /// Update on every arm (dense) or both orderings (sparse) each step
    /// instead of only the chosen one.
    pub all_arms: bool,
    /// Item features for sparse datasets.
    pub catalog: Option<&'a ItemCatalog>,
    /// Re-encode user features (e.g. under a context mask) instead of using
    /// the stored contexts.
    pub encoder: Option<&'a ContextEncoder>,
}

impl Default for Pretraining<'_> {
    fn default() -> Self {
        Self {
            steps: 0,
            seed: 0,
            all_arms: false,
            catalog: None,
            encoder: None,
        }
    }
}

/// On-policy pre-training on a generated dataset: each step samples a user
/// uniformly, lets the model act, and updates it with the stored reward for
/// that action.
pub fn pretrain(model: &mut LinUcbModel, dataset: &PreferenceDataset, phase: Pretraining<'_>) -> Result<()> {
    if phase.steps == 0 {
        return Ok(());
    }
    if dataset.is_empty() {
        return Err(Error::Config("cannot pre-train on an empty dataset".into()));
    }
    let contexts: Vec<ContextVector> = match phase.encoder {
        Some(enc) => dataset
            .records
            .iter()
            .map(|r| enc.encode(&r.user.features))
            .collect::<Result<_, _>>()?,
        None => dataset.records.iter().map(|r| r.user.context.clone()).collect(),
    };
    let c = contexts[0].dim();
    let mut rng = rng_for(phase.seed, 6);
    match (dataset.mode(), phase.catalog) {
        (GenerationMode::Dense, None) => {
            let k = dataset.header.arms;
            if model.dim() != k * c {
                return Err(Error::Config(format!(
                    "model dimension {} does not match {k} arms x {c} context features",
                    model.dim()
                )));
            }
            for _ in 0..phase.steps {
                let u = rng.random_range(0..dataset.len());
                let Rewards::Dense { rewards, .. } = &dataset.records[u].rewards else {
                    return Err(Error::Config("dataset mixes dense and sparse records".into()));
                };
                let candidates = (0..k)
                    .map(|arm| encode_context_arm(&contexts[u], arm, k))
                    .collect::<Result<Vec<_>, _>>()?;
                if phase.all_arms {
                    for (x, &r) in candidates.iter().zip(rewards) {
                        model.update(x, r)?;
                    }
                } else {
                    let arm = model.select(&candidates)?;
                    model.update(&candidates[arm], rewards[arm])?;
                }
            }
        }
        (GenerationMode::Sparse, Some(catalog)) => {
            if dataset.header.catalog_id.as_deref().is_some_and(|id| id != catalog.id()) {
                return Err(Error::Config("dataset was generated over a different catalog".into()));
            }
            let p = catalog.feature_dim();
            if model.dim() != c * p {
                return Err(Error::Config(format!(
                    "model dimension {} does not match {c} context x {p} item features",
                    model.dim()
                )));
            }
            for _ in 0..phase.steps {
                let u = rng.random_range(0..dataset.len());
                let Rewards::Sparse { entries } = &dataset.records[u].rewards else {
                    return Err(Error::Config("dataset mixes dense and sparse records".into()));
                };
                // Entries hold both orientations, so this also randomizes
                // which item is presented first.
                let e = entries[rng.random_range(0..entries.len())];
                let item = |id: usize| {
                    catalog
                        .features(id)
                        .ok_or_else(|| Error::Config(format!("item {id} is not in the catalog")))
                };
                let (first, second) = (item(e.first)?, item(e.second)?);
                let reverse = entries
                    .iter()
                    .find(|o| o.first == e.second && o.second == e.first)
                    .map_or(1.0 - e.fraction, |o| o.fraction);
                if phase.all_arms {
                    model.update(&encode_pairwise(&contexts[u], first, second)?, e.fraction)?;
                    model.update(&encode_pairwise(&contexts[u], second, first)?, reverse)?;
                } else {
                    let choice = select_sleeping(model, &contexts[u], (first, second))?;
                    let (x, r) = if choice.chosen == 0 {
                        (encode_pairwise(&contexts[u], first, second)?, e.fraction)
                    } else {
                        (encode_pairwise(&contexts[u], second, first)?, reverse)
                    };
                    model.update(&x, r)?;
                }
            }
        }
        (GenerationMode::Dense, Some(_)) => {
            return Err(Error::Config("dense dataset cannot pre-train a sleeping model".into()));
        }
        (GenerationMode::Sparse, None) => {
            return Err(Error::Config("sparse dataset needs an item catalog to pre-train".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::FeatureVector;
    use crate::data::{ItemAttribute, UserFeatures};
    use crate::generate::{DatasetHeader, PairEntry, SyntheticUser, UserRecord};

    fn dataset(rewards: Vec<Rewards>, arms: usize) -> PreferenceDataset {
        let mode = rewards[0].mode();
        PreferenceDataset {
            header: DatasetHeader {
                mode,
                arms,
                catalog_id: None,
                repeats: 1,
                seed: 0,
                oracle: "test".into(),
                pairs_per_user: None,
                failed_queries: 0,
                dropped_users: 0,
                provenance: Default::default(),
            },
            records: rewards
                .into_iter()
                .enumerate()
                .map(|(i, r)| UserRecord {
                    user: SyntheticUser {
                        id: i as u64,
                        features: UserFeatures::default(),
                        persona: String::new(),
                        context: ContextVector::new(vec![1.0]),
                    },
                    rewards: r,
                })
                .collect(),
        }
    }

    fn dense_one() -> PreferenceDataset {
        dataset(
            vec![Rewards::Dense {
                rewards: vec![0.0, 1.0],
                wins: vec![0, 2],
                comparisons: vec![2, 2],
            }],
            2,
        )
    }

    #[test]
    fn zero_steps_is_identity() {
        let mut m = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        pretrain(&mut m, &dense_one(), Pretraining::default()).unwrap();
        assert_eq!(m, LinUcbModel::new(2, 10.0, 1.0).unwrap());
    }

    #[test]
    fn learns_the_better_arm() {
        let mut m = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        let phase = Pretraining {
            steps: 200,
            seed: 4,
            ..Default::default()
        };
        pretrain(&mut m, &dense_one(), phase).unwrap();
        m.set_alpha(0.0).unwrap();
        let ctx = ContextVector::new(vec![1.0]);
        let xs: Vec<FeatureVector> = (0..2).map(|a| encode_context_arm(&ctx, a, 2).unwrap()).collect();
        assert_eq!(m.select(&xs).unwrap(), 1);
        let mut again = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        pretrain(&mut again, &dense_one(), phase).unwrap();
        again.set_alpha(0.0).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn mode_mismatch() {
        let cat = ItemCatalog::full_grid(vec![ItemAttribute::new("x", &["a", "b"], false)]).unwrap();
        let mut m = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        let phase = Pretraining {
            steps: 5,
            catalog: Some(&cat),
            ..Default::default()
        };
        assert!(matches!(pretrain(&mut m, &dense_one(), phase), Err(Error::Config(_))));
        let sparse = dataset(
            vec![Rewards::Sparse {
                entries: vec![
                    PairEntry { first: 0, second: 1, fraction: 0.9 },
                    PairEntry { first: 1, second: 0, fraction: 0.1 },
                ],
            }],
            2,
        );
        let mut s = LinUcbModel::new(1, 10.0, 1.0).unwrap();
        let no_catalog = Pretraining { steps: 5, ..Default::default() };
        assert!(matches!(pretrain(&mut s, &sparse, no_catalog), Err(Error::Config(_))));
        let both = Pretraining {
            steps: 300,
            all_arms: true,
            ..phase
        };
        pretrain(&mut s, &sparse, both).unwrap();
        let a = cat.features(0).unwrap();
        let b = cat.features(1).unwrap();
        let ctx = ContextVector::new(vec![1.0]);
        assert_eq!(select_sleeping(&s, &ctx, (a, b)).unwrap().chosen, 0);
        assert_eq!(select_sleeping(&s, &ctx, (b, a)).unwrap().chosen, 1);
    }

    #[test]
    fn on_policy_sparse_recovers_item_order() {
        let cat = ItemCatalog::full_grid(vec![
            ItemAttribute::new("x", &["0", "1", "2"], true),
            ItemAttribute::new("y", &["0", "1", "2"], true),
        ])
        .unwrap();
        let utility = |i: usize| {
            let f = &cat.features(i).unwrap().0;
            0.1 + 0.5 * f[0] + 0.3 * f[1]
        };
        let mut entries = Vec::new();
        for i in 0..cat.len() {
            for j in 0..cat.len() {
                if i != j {
                    entries.push(PairEntry {
                        first: i,
                        second: j,
                        fraction: 0.5 * (utility(i) - utility(j) + 1.0),
                    });
                }
            }
        }
        let mut data = dataset(vec![Rewards::Sparse { entries }], cat.len());
        data.header.mode = GenerationMode::Sparse;
        let mut m = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        let phase = Pretraining {
            steps: 3000,
            seed: 1,
            catalog: Some(&cat),
            ..Default::default()
        };
        pretrain(&mut m, &data, phase).unwrap();
        let ctx = ContextVector::new(vec![1.0]);
        for i in 0..cat.len() {
            for j in 0..cat.len() {
                // The uncentered reward biases the learned direction, so
                // near-ties are not required to resolve.
                if utility(i) >= utility(j) + 0.1 {
                    let (fi, fj) = (cat.features(i).unwrap(), cat.features(j).unwrap());
                    assert_eq!(select_sleeping(&m, &ctx, (fi, fj)).unwrap().chosen, 0, "{i} vs {j}");
                }
            }
        }
    }
}
