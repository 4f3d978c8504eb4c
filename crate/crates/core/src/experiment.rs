//! Warm-start versus cold-start comparisons, and end-to-end trials of the
//! two bundled scenarios.

use rayon::prelude::*;

use crate::bandit::LinUcbModel;
use crate::data::{read_conjoint_log, write_conjoint_log, ContextEncoder, ContextMask, MaskKind};
use crate::env::{
    aggregate_runs, pretrain, regret_reduction, run_sleeping_replay, run_standard, Feedback,
    Pretraining, RegretSummary, RegretTrace, ReplayOptions, SleepingReplayEnvironment,
    StandardEnvironment,
};
use crate::error::Result;
use crate::generate::{generate_dense, generate_sparse, sample_users, GenerationOptions};
use crate::scenario::{DonationScenario, VaccineScenario, TASKS_PER_PARTICIPANT};

/// Paired runs of a pre-trained model and a fresh one under the same seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub steps: usize,
    pub pretrained: Vec<RegretTrace>,
    pub cold: Vec<RegretTrace>,
}

impl Comparison {
    /// Reduction of the mean cumulative regret at the horizon, in percent.
    pub fn mean_reduction(&self) -> Result<Option<f64>> {
        let (p, c) = self.summaries()?;
        let at = |s: &RegretSummary| s.mean.get(self.steps.wrapping_sub(1)).copied().unwrap_or(0.0);
        let (p, c) = (at(&p), at(&c));
        Ok((c != 0.0).then(|| 100.0 * (c - p) / c))
    }

    pub fn per_run(&self) -> Result<Vec<Option<f64>>> {
        self.pretrained
            .iter()
            .zip(&self.cold)
            .map(|(p, c)| regret_reduction(p, c, self.steps))
            .collect()
    }

    /// Mean and variance curves, pre-trained first.
    pub fn summaries(&self) -> Result<(RegretSummary, RegretSummary)> {
        Ok((aggregate_runs(&self.pretrained)?, aggregate_runs(&self.cold)?))
    }
}

fn fresh_like(model: &LinUcbModel) -> Result<LinUcbModel> {
    Ok(LinUcbModel::new(model.dim(), model.alpha(), model.ridge())?)
}

/// Runs copies of `pretrained` and of a fresh model with its settings on
/// `env`, once per seed.
pub fn compare_standard(
    pretrained: &LinUcbModel,
    env: &StandardEnvironment,
    steps: usize,
    seeds: &[u64],
) -> Result<Comparison> {
    let runs = seeds
        .par_iter()
        .map(|&seed| -> Result<(RegretTrace, RegretTrace)> {
            let mut warm = pretrained.clone();
            let mut cold = fresh_like(pretrained)?;
            Ok((
                run_standard(&mut warm, env, steps, seed)?,
                run_standard(&mut cold, env, steps, seed)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pretrained, cold) = runs.into_iter().unzip();
    Ok(Comparison { steps, pretrained, cold })
}

/// Replays the log once per seed, each seed shuffling the task order.
pub fn compare_replay(
    pretrained: &LinUcbModel,
    env: &SleepingReplayEnvironment,
    steps: usize,
    update: bool,
    seeds: &[u64],
) -> Result<Comparison> {
    let steps = steps.min(env.len());
    let runs = seeds
        .par_iter()
        .map(|&seed| -> Result<(RegretTrace, RegretTrace)> {
            let options = ReplayOptions {
                update,
                steps: Some(steps),
                shuffle: Some(seed),
            };
            let mut warm = pretrained.clone();
            let mut cold = fresh_like(pretrained)?;
            Ok((
                run_sleeping_replay(&mut warm, env, options)?,
                run_sleeping_replay(&mut cold, env, options)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pretrained, cold) = runs.into_iter().unzip();
    Ok(Comparison { steps, pretrained, cold })
}

/// Settings of one end-to-end trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub pretrain_users: usize,
    /// Bernoulli oracle noise; 1 makes every answer a coin flip.
    pub noise: f64,
    pub alpha: f64,
    pub ridge: f64,
    pub repeats: u32,
    pub pairs_per_user: usize,
    pub steps_per_user: usize,
    pub horizon: usize,
    /// Standard environment only.
    pub eval_users: usize,
    pub feedback: Feedback,
    /// Replay only.
    pub participants: usize,
    pub mask: MaskKind,
}

impl Trial {
    pub fn donation(pretrain_users: usize, noise: f64) -> Self {
        Self {
            pretrain_users,
            noise,
            alpha: crate::config::DEFAULT_ALPHA,
            ridge: crate::config::DEFAULT_RIDGE,
            repeats: crate::generate::DEFAULT_REPEATS,
            pairs_per_user: crate::generate::DEFAULT_PAIRS_PER_USER,
            steps_per_user: crate::scenario::DONATION_STEPS_PER_USER,
            horizon: crate::env::DEFAULT_HORIZON,
            eval_users: crate::scenario::DONATION_USERS,
            feedback: Feedback::Expected,
            participants: 0,
            mask: MaskKind::Full,
        }
    }

    pub fn vaccine(pretrain_users: usize, participants: usize, mask: MaskKind) -> Self {
        Self {
            pretrain_users,
            participants,
            mask,
            steps_per_user: crate::scenario::VACCINE_STEPS_PER_USER,
            eval_users: 0,
            ..Self::donation(pretrain_users, 0.0)
        }
    }

    /// Donation scenario with hidden utilities drawn from `seed`: dense
    /// generation, on-policy pre-training, then one paired run on a fresh
    /// evaluation population. Returns the reduction in percent.
    pub fn run_donation(&self, seed: u64) -> Result<Option<f64>> {
        let scenario = DonationScenario::new(seed);
        let users = sample_users(&scenario.spec, self.pretrain_users, seed.wrapping_add(1000))?;
        let oracle = scenario.oracle(&users, self.noise)?;
        let options = GenerationOptions {
            repeats: self.repeats,
            seed,
            pairs_per_user: self.pairs_per_user,
        };
        let dataset = generate_dense(&users, &scenario.arms, &oracle, options)?;
        let mut model = LinUcbModel::new(scenario.model_dim(), self.alpha, self.ridge)?;
        let phase = Pretraining {
            steps: self.steps_per_user * dataset.len(),
            seed,
            ..Default::default()
        };
        pretrain(&mut model, &dataset, phase)?;
        let eval = sample_users(&scenario.spec, self.eval_users, seed.wrapping_add(5000))?;
        let env = scenario.environment(&eval, self.feedback)?;
        compare_standard(&model, &env, self.horizon, &[seed])?.mean_reduction()
    }

    /// Vaccine scenario with hidden utilities drawn from `seed`: a synthetic
    /// survey log, sparse generation over synthetic users, pre-training
    /// under the mask, then one shuffled replay with fine-tuning.
    pub fn run_vaccine(&self, seed: u64) -> Result<Option<f64>> {
        let scenario = VaccineScenario::new(seed);
        let spec = scenario.user_spec();
        let rows = scenario.synthetic_log(self.participants, TASKS_PER_PARTICIPANT, seed.wrapping_add(100))?;
        let mut buf = Vec::new();
        write_conjoint_log(&mut buf, &scenario.schema, &rows)?;
        let log = read_conjoint_log(buf.as_slice(), &scenario.schema)?;
        let mask = ContextMask::resolve(self.mask, &spec, &scenario.schema.partial_personal())?;
        let encoder = ContextEncoder::new(&spec, &mask)?;
        let env = SleepingReplayEnvironment::from_log(&log, &encoder)?;
        let users = sample_users(&spec, self.pretrain_users, seed.wrapping_add(1000))?;
        let oracle = scenario.oracle(&users, self.noise)?;
        let options = GenerationOptions {
            repeats: self.repeats,
            seed,
            pairs_per_user: self.pairs_per_user,
        };
        let dataset = generate_sparse(&users, &scenario.catalog, &oracle, options)?;
        let dim = encoder.dim() * scenario.catalog.feature_dim();
        let mut model = LinUcbModel::new(dim, self.alpha, self.ridge)?;
        let phase = Pretraining {
            steps: self.steps_per_user * dataset.len(),
            seed,
            catalog: Some(&scenario.catalog),
            encoder: Some(&encoder),
            ..Default::default()
        };
        pretrain(&mut model, &dataset, phase)?;
        compare_replay(&model, &env, self.horizon, true, &[seed])?.mean_reduction()
    }
}
