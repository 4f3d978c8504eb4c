use rand::{Rng, RngCore};

use crate::bandit::{encode_context_arm, encode_pairwise, select_sleeping, ContextVector, ItemFeatures, LinUcbModel};
use crate::error::Result;

/// Arm-selection rule for the standard K-arm loop.
pub trait Policy {
    /// Picks an arm. `true_rewards` is only consulted by the oracle
    /// comparator.
    fn select(&mut self, context: &ContextVector, true_rewards: &[f64], rng: &mut dyn RngCore) -> Result<usize>;

    fn observe(&mut self, context: &ContextVector, num_arms: usize, arm: usize, reward: f64) -> Result<()>;
}

/// Selection rule for the two-item sleeping loop. Returns 0 or 1.
pub trait SleepingPolicy {
    fn choose(
        &mut self,
        context: &ContextVector,
        first: &ItemFeatures,
        second: &ItemFeatures,
        rng: &mut dyn RngCore,
    ) -> Result<usize>;

    /// Feedback for having put `chosen` ahead of `other`.
    fn observe(&mut self, context: &ContextVector, chosen: &ItemFeatures, other: &ItemFeatures, reward: f64) -> Result<()>;
}

impl Policy for LinUcbModel {
    fn select(&mut self, context: &ContextVector, true_rewards: &[f64], _: &mut dyn RngCore) -> Result<usize> {
        let k = true_rewards.len();
        let candidates = (0..k)
            .map(|arm| encode_context_arm(context, arm, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LinUcbModel::select(self, &candidates)?)
    }

    fn observe(&mut self, context: &ContextVector, num_arms: usize, arm: usize, reward: f64) -> Result<()> {
        let x = encode_context_arm(context, arm, num_arms)?;
        Ok(self.update(&x, reward)?)
    }
}

impl SleepingPolicy for LinUcbModel {
    fn choose(
        &mut self,
        context: &ContextVector,
        first: &ItemFeatures,
        second: &ItemFeatures,
        _: &mut dyn RngCore,
    ) -> Result<usize> {
        Ok(select_sleeping(self, context, (first, second))?.chosen)
    }

    fn observe(&mut self, context: &ContextVector, chosen: &ItemFeatures, other: &ItemFeatures, reward: f64) -> Result<()> {
        let x = encode_pairwise(context, chosen, other)?;
        Ok(self.update(&x, reward)?)
    }
}

/// Always picks an arm with the highest true reward (lowest index on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn select(&mut self, _: &ContextVector, true_rewards: &[f64], _: &mut dyn RngCore) -> Result<usize> {
        let mut best = 0;
        for (k, r) in true_rewards.iter().enumerate() {
            if *r > true_rewards[best] {
                best = k;
            }
        }
        Ok(best)
    }

    fn observe(&mut self, _: &ContextVector, _: usize, _: usize, _: f64) -> Result<()> {
        Ok(())
    }
}

/// Uniformly random choices; never learns.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn select(&mut self, _: &ContextVector, true_rewards: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        Ok(rng.random_range(0..true_rewards.len()))
    }

    fn observe(&mut self, _: &ContextVector, _: usize, _: usize, _: f64) -> Result<()> {
        Ok(())
    }
}

impl SleepingPolicy for RandomPolicy {
    fn choose(&mut self, _: &ContextVector, _: &ItemFeatures, _: &ItemFeatures, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(usize::from(rng.random::<bool>()))
    }

    fn observe(&mut self, _: &ContextVector, _: &ItemFeatures, _: &ItemFeatures, _: f64) -> Result<()> {
        Ok(())
    }
}
