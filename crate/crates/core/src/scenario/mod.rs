//! Ready-made experiment setups: a K-arm message-style scenario and a
//! paired-profile vaccine conjoint scenario, each with a hidden ground-truth
//! utility that drives both the simulated oracle and the evaluation
//! environment.

mod donation;
mod vaccine;

pub use donation::{DonationScenario, DONATION_STEPS_PER_USER, DONATION_USERS, STYLES};
pub use vaccine::{
    VaccineScenario, TASKS_PER_PARTICIPANT, VACCINE_STEPS_PER_USER, VACCINE_USERS,
};

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bandit::{ContextVector, ItemFeatures};
use crate::generate::SyntheticUser;
use crate::oracle::{BernoulliOracle, UtilitySource};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `p(phi, f) = sigmoid(bias + w^T f + phi^T M f)`: a population-level item
/// effect plus a user-dependent interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenUtility {
    pub bias: f64,
    pub item_weights: Vec<f64>,
    /// `c` rows of `p` weights.
    pub interaction: Vec<Vec<f64>>,
}

impl HiddenUtility {
    /// Interaction weights drawn i.i.d. `N(0, interaction_sd^2)`.
    pub fn with_random_interaction<R: Rng + ?Sized>(
        bias: f64,
        item_weights: Vec<f64>,
        context_dim: usize,
        interaction_sd: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, interaction_sd).expect("finite standard deviation");
        let interaction = (0..context_dim)
            .map(|_| (0..item_weights.len()).map(|_| normal.sample(rng)).collect())
            .collect();
        Self {
            bias,
            item_weights,
            interaction,
        }
    }

    pub fn logit(&self, context: &ContextVector, item: &ItemFeatures) -> f64 {
        let f = item.as_slice();
        let mut u = self.bias + self.item_weights.iter().zip(f).map(|(w, x)| w * x).sum::<f64>();
        for (phi, row) in context.as_slice().iter().zip(&self.interaction) {
            if *phi != 0.0 {
                u += phi * row.iter().zip(f).map(|(m, x)| m * x).sum::<f64>();
            }
        }
        u
    }

    pub fn probability(&self, context: &ContextVector, item: &ItemFeatures) -> f64 {
        sigmoid(self.logit(context, item))
    }
}

/// Ground-truth utilities of a set of users over a set of items, computed
/// on demand from their stored full contexts.
#[derive(Debug, Clone)]
pub struct PopulationUtilities {
    truth: Arc<HiddenUtility>,
    contexts: HashMap<u64, ContextVector>,
    items: Arc<Vec<ItemFeatures>>,
}

impl PopulationUtilities {
    pub fn new(truth: Arc<HiddenUtility>, users: &[SyntheticUser], items: Arc<Vec<ItemFeatures>>) -> Self {
        Self {
            truth,
            contexts: users.iter().map(|u| (u.id, u.context.clone())).collect(),
            items,
        }
    }
}

impl UtilitySource for PopulationUtilities {
    fn utility(&self, user: u64, item: usize) -> Option<f64> {
        let ctx = self.contexts.get(&user)?;
        let f = self.items.get(item)?;
        Some(self.truth.probability(ctx, f))
    }
}

/// Simulated oracle answering from `truth`, with utilities shrunk toward
/// 1/2 by `noise` (1 = every answer a coin flip).
pub fn simulated_oracle(
    truth: Arc<HiddenUtility>,
    users: &[SyntheticUser],
    items: Arc<Vec<ItemFeatures>>,
    noise: f64,
) -> crate::Result<BernoulliOracle> {
    let source = PopulationUtilities::new(truth, users, items);
    Ok(BernoulliOracle::new(Arc::new(source))
        .with_name("simulated")
        .with_noise(noise)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_is_bilinear() {
        let h = HiddenUtility {
            bias: 0.5,
            item_weights: vec![1.0, -1.0],
            interaction: vec![vec![2.0, 0.0], vec![0.0, 3.0]],
        };
        let ctx = ContextVector::new(vec![1.0, 0.5]);
        let f = ItemFeatures::new(vec![1.0, 2.0]);
        assert!((h.logit(&ctx, &f) - (0.5 + 1.0 - 2.0 + 2.0 + 3.0)).abs() < 1e-12);
        assert!((h.probability(&ctx, &ItemFeatures::new(vec![0.0, 0.0])) - sigmoid(0.5)).abs() < 1e-12);
    }
}
