use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{Choice, OracleError, PairQuery, PreferenceOracle};

/// Per-(user, arm or item) success probabilities of a Bernoulli reward.
pub trait UtilitySource: Send + Sync {
    fn utility(&self, user: u64, item: usize) -> Option<f64>;
}

/// Explicit utility table.
#[derive(Debug, Clone, Default)]
pub struct BernoulliUtilityModel {
    utilities: HashMap<(u64, usize), f64>,
}

impl BernoulliUtilityModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, user: u64, item: usize, p: f64) -> Result<(), OracleError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(OracleError::Config(format!("utility {p} outside [0, 1]")));
        }
        self.utilities.insert((user, item), p);
        Ok(())
    }

    /// One utility row per user, indexed by arm or item id.
    pub fn from_rows(rows: &[(u64, Vec<f64>)]) -> Result<Self, OracleError> {
        let mut m = Self::new();
        for (user, ps) in rows {
            for (item, p) in ps.iter().enumerate() {
                m.set(*user, item, *p)?;
            }
        }
        Ok(m)
    }
}

impl UtilitySource for BernoulliUtilityModel {
    fn utility(&self, user: u64, item: usize) -> Option<f64> {
        self.utilities.get(&(user, item)).copied()
    }
}

fn lookup(source: &dyn UtilitySource, user: u64, item: usize) -> Result<f64, OracleError> {
    match source.utility(user, item) {
        Some(p) if (0.0..=1.0).contains(&p) => Ok(p),
        Some(p) => Err(OracleError::Config(format!(
            "utility {p} for user {user}, item {item} outside [0, 1]"
        ))),
        None => Err(OracleError::Config(format!(
            "no utility for user {user}, item {item}"
        ))),
    }
}

/// Draws `Y_a ~ Bern(p_a)`, `Y_b ~ Bern(p_b)`; the strictly larger draw wins
/// and ties are settled by a fair coin, so `Pr(A) = (p_a - p_b + 1) / 2`.
pub fn simulate_bernoulli_preference<R: RngCore + ?Sized>(
    source: &dyn UtilitySource,
    user: u64,
    item_a: usize,
    item_b: usize,
    rng: &mut R,
) -> Result<Choice, OracleError> {
    let pa = lookup(source, user, item_a)?;
    let pb = lookup(source, user, item_b)?;
    Ok(draw(pa, pb, rng))
}

fn draw<R: RngCore + ?Sized>(pa: f64, pb: f64, rng: &mut R) -> Choice {
    let ya = rng.random::<f64>() < pa;
    let yb = rng.random::<f64>() < pb;
    match (ya, yb) {
        (true, false) => Choice::A,
        (false, true) => Choice::B,
        _ => {
            if rng.random::<bool>() {
                Choice::A
            } else {
                Choice::B
            }
        }
    }
}

/// Simulated oracle answering from Bernoulli utilities.
///
/// `noise` in `[0, 1]` shrinks every utility toward 1/2:
/// `p' = (1 - noise) p + noise / 2`. At `noise = 1` all utilities are equal
/// and every answer is a fair coin.
#[derive(Clone)]
pub struct BernoulliOracle {
    source: Arc<dyn UtilitySource>,
    noise: f64,
    name: String,
}

impl BernoulliOracle {
    pub fn new(source: Arc<dyn UtilitySource>) -> Self {
        Self {
            source,
            noise: 0.0,
            name: "bernoulli".into(),
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Result<Self, OracleError> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(OracleError::Config(format!("noise {noise} outside [0, 1]")));
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_owned();
        self
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    fn shrink(&self, p: f64) -> f64 {
        (1.0 - self.noise) * p + 0.5 * self.noise
    }
}

impl PreferenceOracle for BernoulliOracle {
    fn id(&self) -> String {
        if self.noise == 0.0 {
            self.name.clone()
        } else {
            format!("{}(noise={})", self.name, self.noise)
        }
    }

    fn prefer(&self, query: &PairQuery<'_>, rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
        let pa = self.shrink(lookup(&*self.source, query.user_id, query.first.id)?);
        let pb = self.shrink(lookup(&*self.source, query.user_id, query.second.id)?);
        Ok(draw(pa, pb, rng))
    }
}
