use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};

/// Utilities closer than this are treated as tied when comparing orders.
const TIE_TOLERANCE: f64 = 1e-9;

/// Expected versus simulated pairwise win totals under Bernoulli utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOrderReport {
    pub utilities: Vec<f64>,
    pub trials: u64,
    /// Mean over trials of `Z_i = sum_j Z_ij`.
    pub empirical: Vec<f64>,
    /// `K/2 (p_i + 1) - 1/2 sum_j p_j`.
    pub theoretical: Vec<f64>,
    /// `3 sqrt(K / 4 / trials)`, a bound on three standard errors.
    pub band: f64,
    /// Every empirical mean lies within `band` of its expectation.
    pub within_band: bool,
    /// Strictly larger utilities have strictly larger empirical means.
    pub order_preserved: bool,
}

/// Simulates every ordered pair `(i, j)`, including `i = j`, `trials` times.
/// `Z_ij` is 1 when arm `i` wins: `Y_i ~ Bern(p_i)` and `Y_j ~ Bern(p_j)` are
/// drawn independently, the strictly larger draw wins and ties are a coin.
pub fn rank_order_check(p: &[f64], trials: u64, seed: u64) -> Result<RankOrderReport> {
    if p.is_empty() {
        return Err(Error::Config("utility vector is empty".into()));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("utility {bad} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let k = p.len();
    let sum: f64 = p.iter().sum();
    let theoretical: Vec<f64> = p.iter().map(|pi| k as f64 / 2.0 * (pi + 1.0) - 0.5 * sum).collect();
    let mut rng = rng_for(seed, 7);
    let mut totals = vec![0u64; k];
    for _ in 0..trials {
        for i in 0..k {
            for j in 0..k {
                let yi = rng.random::<f64>() < p[i];
                let yj = rng.random::<f64>() < p[j];
                let win = match (yi, yj) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => rng.random::<bool>(),
                };
                totals[i] += u64::from(win);
            }
        }
    }
    let empirical: Vec<f64> = totals.iter().map(|&t| t as f64 / trials as f64).collect();
    let band = 3.0 * (k as f64 / 4.0 / trials as f64).sqrt();
    let within_band = empirical
        .iter()
        .zip(&theoretical)
        .all(|(e, t)| (e - t).abs() <= band);
    let mut order_preserved = true;
    for i in 0..k {
        for j in 0..k {
            if p[i] > p[j] + TIE_TOLERANCE && empirical[i] <= empirical[j] {
                order_preserved = false;
            }
        }
    }
    Ok(RankOrderReport {
        utilities: p.to_vec(),
        trials,
        empirical,
        theoretical,
        band,
        within_band,
        order_preserved,
    })
}
