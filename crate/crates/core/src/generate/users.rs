use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::ContextVector;
use crate::data::{ContextEncoder, UserFeatureSpec, UserFeatures};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUser {
    pub id: u64,
    pub features: UserFeatures,
    pub persona: String,
    pub context: ContextVector,
}

/// Draws `n` users i.i.d. from `spec` with ids `0..n`.
///
/// Users come from one sequential stream, so the first `k` users of a larger
/// sample equal a sample of size `k` under the same seed.
pub fn sample_users(spec: &UserFeatureSpec, n: usize, seed: u64) -> Result<Vec<SyntheticUser>> {
    spec.validate()?;
    let encoder = ContextEncoder::full(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|id| {
            let features = spec.sample(&mut rng);
            let persona = render_persona(&features)?;
            let context = encoder.encode(&features)?;
            Ok(SyntheticUser {
                id,
                features,
                persona,
                context,
            })
        })
        .collect()
}

/// Text description of a user listing every attribute in declaration order.
pub fn render_persona(features: &UserFeatures) -> Result<String> {
    if features.is_empty() {
        return Err(Error::Usage("cannot describe a user with no attributes".into()));
    }
    let parts: Vec<String> = features
        .iter()
        .map(|(name, value)| format!("{}: {value}", name.replace('_', " ")))
        .collect();
    Ok(format!("This user has the following attributes. {}.", parts.join("; ")))
}
