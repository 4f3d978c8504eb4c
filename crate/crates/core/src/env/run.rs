use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Policy, SleepingPolicy};
use super::{rng_for, RegretTrace};
use crate::bandit::{ContextVector, ItemFeatures, LinUcbModel};
use crate::data::{ConjointLog, ContextEncoder, DataError};
use crate::error::{Error, Result};
use crate::oracle::Choice;

/// What the learner observes after pulling an arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// The true reward itself.
    #[default]
    Expected,
    /// A Bernoulli draw with the true reward as success probability.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardUser {
    pub context: ContextVector,
    /// True reward of every arm, in `[0, 1]`.
    pub rewards: Vec<f64>,
}

/// Users with known per-arm rewards, sampled uniformly with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardEnvironment {
    users: Vec<StandardUser>,
    num_arms: usize,
    feedback: Feedback,
}

impl StandardEnvironment {
    pub fn new(users: Vec<StandardUser>, feedback: Feedback) -> Result<Self> {
        let first = users
            .first()
            .ok_or_else(|| Error::Config("environment has no users".into()))?;
        let num_arms = first.rewards.len();
        let c = first.context.dim();
        if num_arms == 0 {
            return Err(Error::Config("environment has no arms".into()));
        }
        for (i, u) in users.iter().enumerate() {
            if u.rewards.len() != num_arms || u.context.dim() != c {
                return Err(Error::Config(format!("user {i} does not match the environment shape")));
            }
            if u.rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::Config(format!("user {i} has a reward outside [0, 1]")));
            }
            if !u.context.is_finite() {
                return Err(Error::Config(format!("user {i} has a non-finite context")));
            }
        }
        Ok(Self {
            users,
            num_arms,
            feedback,
        })
    }

    pub fn users(&self) -> &[StandardUser] {
        &self.users
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn context_dim(&self) -> usize {
        self.users[0].context.dim()
    }

    pub fn feedback(&self) -> Feedback {
        self.feedback
    }
}

/// Runs `policy` for `steps` rounds. User draws, feedback noise and policy
/// randomness use separate streams of `seed`, so different policies run
/// with the same seed face the same user sequence.
pub fn run_standard_with(
    policy: &mut dyn Policy,
    env: &StandardEnvironment,
    steps: usize,
    seed: u64,
) -> Result<RegretTrace> {
    let mut users = rng_for(seed, 1);
    let mut noise = rng_for(seed, 2);
    let mut own = rng_for(seed, 3);
    let mut regret = Vec::with_capacity(steps);
    for _ in 0..steps {
        let user = &env.users[users.random_range(0..env.users.len())];
        let arm = policy.select(&user.context, &user.rewards, &mut own)?;
        let truth = *user
            .rewards
            .get(arm)
            .ok_or_else(|| Error::Internal(format!("policy chose arm {arm} of {}", env.num_arms)))?;
        let best = user.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        regret.push(best - truth);
        let observed = match env.feedback {
            Feedback::Expected => truth,
            Feedback::Bernoulli => f64::from(u8::from(noise.random::<f64>() < truth)),
        };
        policy.observe(&user.context, env.num_arms, arm, observed)?;
    }
    Ok(RegretTrace::from_instantaneous(regret, seed))
}

pub fn run_standard(
    model: &mut LinUcbModel,
    env: &StandardEnvironment,
    steps: usize,
    seed: u64,
) -> Result<RegretTrace> {
    if model.dim() != env.num_arms * env.context_dim() {
        return Err(Error::Config(format!(
            "model dimension {} does not match {} arms x {} context features",
            model.dim(),
            env.num_arms,
            env.context_dim()
        )));
    }
    run_standard_with(model, env, steps, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTask {
    pub user: usize,
    pub context: ContextVector,
    pub first_id: usize,
    pub second_id: usize,
    pub first: ItemFeatures,
    pub second: ItemFeatures,
    pub choice: Choice,
}

/// Recorded pairwise choices replayed in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SleepingReplayEnvironment {
    tasks: Vec<ReplayTask>,
}

impl SleepingReplayEnvironment {
    pub fn new(tasks: Vec<ReplayTask>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("replay environment has no tasks".into()));
        }
        Ok(Self { tasks })
    }

    /// Encodes every participant with `encoder` and looks up both profiles
    /// of every task in the log's catalog.
    pub fn from_log(log: &ConjointLog, encoder: &ContextEncoder) -> Result<Self> {
        let contexts = log
            .users
            .iter()
            .map(|u| encoder.encode(&u.features))
            .collect::<Result<Vec<_>, _>>()?;
        let item = |id: usize| -> Result<ItemFeatures> {
            log.catalog
                .features(id)
                .cloned()
                .ok_or_else(|| DataError::data(format!("item {id} is not in the catalog")).into())
        };
        let tasks = log
            .tasks
            .iter()
            .map(|t| {
                Ok(ReplayTask {
                    user: t.user,
                    context: contexts[t.user].clone(),
                    first_id: t.first,
                    second_id: t.second,
                    first: item(t.first)?,
                    second: item(t.second)?,
                    choice: t.choice,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tasks)
    }

    pub fn tasks(&self) -> &[ReplayTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayOptions {
    /// Update the learner after every step (fine-tuning).
    pub update: bool,
    /// Horizon; the whole log when `None` or longer than the log.
    pub steps: Option<usize>,
    /// Shuffle the task order with this seed; recorded order when `None`.
    pub shuffle: Option<u64>,
}

pub fn run_sleeping_with(
    policy: &mut dyn SleepingPolicy,
    env: &SleepingReplayEnvironment,
    options: ReplayOptions,
) -> Result<RegretTrace> {
    let mut order: Vec<usize> = (0..env.tasks.len()).collect();
    if let Some(seed) = options.shuffle {
        order.shuffle(&mut rng_for(seed, 4));
    }
    order.truncate(options.steps.unwrap_or(usize::MAX));
    let mut own = rng_for(options.shuffle.unwrap_or(0), 5);
    let mut regret = Vec::with_capacity(order.len());
    for &i in &order {
        let task = &env.tasks[i];
        let chosen = policy.choose(&task.context, &task.first, &task.second, &mut own)?;
        if chosen > 1 {
            return Err(Error::Internal(format!("sleeping policy chose index {chosen}")));
        }
        let reward = if chosen == task.choice.index() { 1.0 } else { 0.0 };
        regret.push(1.0 - reward);
        if options.update {
            let (a, b) = if chosen == 0 {
                (&task.first, &task.second)
            } else {
                (&task.second, &task.first)
            };
            policy.observe(&task.context, a, b, reward)?;
        }
    }
    Ok(RegretTrace::from_instantaneous(regret, options.shuffle.unwrap_or(0)))
}

pub fn run_sleeping_replay(
    model: &mut LinUcbModel,
    env: &SleepingReplayEnvironment,
    options: ReplayOptions,
) -> Result<RegretTrace> {
    let t = &env.tasks[0];
    let need = t.context.dim() * t.first.dim();
    if model.dim() != need {
        return Err(Error::Config(format!(
            "model dimension {} does not match the pairwise encoding dimension {need}",
            model.dim()
        )));
    }
    run_sleeping_with(model, env, options)
}

#[cfg(test)]
mod tests {
    use rand::RngCore;

    use super::super::{OraclePolicy, RandomPolicy};
    use super::*;

    fn env(rewards: Vec<f64>, feedback: Feedback) -> StandardEnvironment {
        let users = (0..5)
            .map(|i| StandardUser {
                context: ContextVector::new(vec![1.0, i as f64 / 5.0]),
                rewards: rewards.clone(),
            })
            .collect();
        StandardEnvironment::new(users, feedback).unwrap()
    }

    #[test]
    fn oracle_and_single_arm_have_no_regret() {
        let e = env(vec![0.2, 0.9, 0.4], Feedback::Bernoulli);
        let t = run_standard_with(&mut OraclePolicy, &e, 200, 1).unwrap();
        assert!(t.cumulative.iter().all(|&c| c == 0.0));
        let single = env(vec![0.3], Feedback::Expected);
        let mut m = LinUcbModel::new(2, 10.0, 1.0).unwrap();
        let t = run_standard(&mut m, &single, 100, 1).unwrap();
        assert!(t.cumulative.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn random_policy_regret_is_half() {
        let e = env(vec![0.0, 1.0], Feedback::Expected);
        let steps = 4000;
        let t = run_standard_with(&mut RandomPolicy, &e, steps, 9).unwrap();
        let total = t.total_at(steps).unwrap();
        let sd = (steps as f64 * 0.25).sqrt();
        assert!((total - steps as f64 / 2.0).abs() <= 3.0 * sd, "{total}");
        assert!(t.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn linucb_learns_and_is_reproducible() {
        let e = env(vec![0.1, 0.8], Feedback::Bernoulli);
        let mut a = LinUcbModel::new(4, 1.0, 1.0).unwrap();
        let mut b = a.clone();
        let ta = run_standard(&mut a, &e, 500, 3).unwrap();
        let tb = run_standard(&mut b, &e, 500, 3).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        let late: f64 = ta.instantaneous[400..].iter().sum();
        assert!(late < 10.0, "{late}");
        let mut wrong = LinUcbModel::new(3, 1.0, 1.0).unwrap();
        assert!(run_standard(&mut wrong, &e, 10, 0).is_err());
    }

    fn replay(n: usize) -> SleepingReplayEnvironment {
        let tasks = (0..n)
            .map(|i| ReplayTask {
                user: i / 5,
                context: ContextVector::new(vec![1.0, (i % 3) as f64]),
                first_id: 0,
                second_id: 1,
                first: ItemFeatures::new(vec![1.0, 0.0]),
                second: ItemFeatures::new(vec![0.0, 1.0]),
                choice: if i % 4 == 0 { Choice::B } else { Choice::A },
            })
            .collect();
        SleepingReplayEnvironment::new(tasks).unwrap()
    }

    struct Perfect(Vec<Choice>, usize);
    impl SleepingPolicy for Perfect {
        fn choose(&mut self, _: &ContextVector, _: &ItemFeatures, _: &ItemFeatures, _: &mut dyn RngCore) -> Result<usize> {
            self.1 += 1;
            Ok(self.0[self.1 - 1].index())
        }
        fn observe(&mut self, _: &ContextVector, _: &ItemFeatures, _: &ItemFeatures, _: f64) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn replay_contracts() {
        let e = replay(2000);
        let choices = e.tasks().iter().map(|t| t.choice).collect();
        let t = run_sleeping_with(&mut Perfect(choices, 0), &e, ReplayOptions::default()).unwrap();
        assert_eq!(t.len(), 2000);
        assert_eq!(t.total_at(2000), Some(0.0));

        let t = run_sleeping_with(&mut RandomPolicy, &e, ReplayOptions { shuffle: Some(2), ..Default::default() }).unwrap();
        let total = t.total_at(2000).unwrap();
        assert!((total - 1000.0).abs() <= 3.0 * (500.0f64).sqrt(), "{total}");

        let opts = ReplayOptions {
            update: true,
            steps: Some(50_000),
            shuffle: Some(1),
        };
        let mut m = LinUcbModel::new(4, 10.0, 1.0).unwrap();
        let t = run_sleeping_replay(&mut m, &e, opts).unwrap();
        assert_eq!(t.len(), 2000);
        assert_eq!(m.updates(), 2000);
        let mut m2 = LinUcbModel::new(4, 10.0, 1.0).unwrap();
        assert_eq!(run_sleeping_replay(&mut m2, &e, opts).unwrap(), t);
        let short = run_sleeping_replay(&mut m2, &e, ReplayOptions { steps: Some(10), ..opts }).unwrap();
        assert_eq!(short.len(), 10);
    }
}
