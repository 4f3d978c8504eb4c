//! Pre-training, online evaluation loops and regret accounting.

mod policy;
mod pretrain;
mod rank;
mod run;
mod trace;

pub use policy::{OraclePolicy, Policy, RandomPolicy, SleepingPolicy};
pub use pretrain::{pretrain, Pretraining};
pub use rank::{rank_order_check, RankOrderReport};
pub use run::{
    run_sleeping_replay, run_sleeping_with, run_standard, run_standard_with, Feedback,
    ReplayOptions, ReplayTask, SleepingReplayEnvironment, StandardEnvironment, StandardUser,
};
pub use trace::{aggregate_runs, regret_reduction, RegretSummary, RegretTrace};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default number of repeated runs per configuration.
pub const DEFAULT_REPETITIONS: usize = 10;
/// Default horizon of an online run.
pub const DEFAULT_HORIZON: usize = 1000;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
