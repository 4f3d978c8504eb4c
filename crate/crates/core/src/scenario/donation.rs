use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{simulated_oracle, HiddenUtility};
use crate::bandit::ItemFeatures;
use crate::data::{Attribute, ContextEncoder, Role, UserFeatureSpec};
use crate::env::{Feedback, StandardEnvironment, StandardUser};
use crate::error::Result;
use crate::generate::SyntheticUser;
use crate::oracle::BernoulliOracle;

/// The four message styles and the instructions used to write them.
pub const STYLES: [(&str, &str); 4] = [
    (
        "Formal",
        "Begin with a formal greeting, introduce the organization, highlight the current need, explain how their contribution can make a difference, and end with a polite request asking for their generous support. The tone is official and respectful, focusing on the importance of the cause.",
    ),
    (
        "Emotional/Narrative",
        "This style leverages storytelling to evoke empathy and compassion from the reader. You can share a real-life story related to the cause, emphasize the struggle, and showcase how their donation can change lives.",
    ),
    (
        "Informative/Educational",
        "This style relies on facts, statistics, and evidence to persuade the user to donate. It educates the reader about the cause, its impact, and how the charity is fighting for it. The reader's decision will be driven by the evidence of how efficient the charity work is.",
    ),
    (
        "Personal/Relatable",
        "Here, you use a more casual, friendly tone. You could even share personal experiences with the charity or testimonies from donors. The essence is to make the reader feel closely connected and to understand that anyone can make a difference.",
    ),
];

/// Default number of synthetic users.
pub const DONATION_USERS: usize = 1000;
/// Pre-training steps per synthetic user.
pub const DONATION_STEPS_PER_USER: usize = 20;

const ARM_EFFECT_SD: f64 = 0.3;
const INTERACTION_SD: f64 = 0.5;

/// Donation email campaign: K = 4 message styles, donors described by eight
/// attributes, and a hidden per-style response probability.
#[derive(Debug, Clone)]
pub struct DonationScenario {
    pub spec: UserFeatureSpec,
    pub arms: Vec<String>,
    pub truth: Arc<HiddenUtility>,
}

impl DonationScenario {
    pub fn user_spec() -> UserFeatureSpec {
        use Role::Personal;
        UserFeatureSpec::new(vec![
            Attribute::integer("age", Personal, 18, 90),
            Attribute::categorical("gender", Personal, &["female", "male", "non-binary"]),
            Attribute::categorical("location", Personal, &["urban", "suburban", "rural"]),
            Attribute::categorical(
                "occupation",
                Personal,
                &["teacher", "engineer", "nurse", "retired", "student", "small business owner"],
            ),
            Attribute::categorical("hobbies", Personal, &["gardening", "reading", "sports", "travel", "volunteering"]),
            Attribute::categorical("financial_situation", Personal, &["struggling", "stable", "comfortable", "wealthy"]),
            Attribute::categorical(
                "donation_motivation",
                Personal,
                &["religious duty", "humanitarian concern", "personal experience", "tax benefits", "community ties"],
            ),
            Attribute::categorical(
                "donation_history",
                Personal,
                &["first-time donor", "occasional donor", "regular donor", "major donor"],
            ),
        ])
        .expect("donation spec is valid")
    }

    /// Scenario whose hidden utilities are drawn from `truth_seed`.
    pub fn new(truth_seed: u64) -> Self {
        let spec = Self::user_spec();
        let c = ContextEncoder::full(&spec).dim();
        let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
        let effect = Normal::new(0.0, ARM_EFFECT_SD).expect("finite sd");
        let arm_effects: Vec<f64> = (0..STYLES.len()).map(|_| effect.sample(&mut rng)).collect();
        let truth = HiddenUtility::with_random_interaction(0.0, arm_effects, c, INTERACTION_SD, &mut rng);
        Self {
            spec,
            arms: STYLES
                .iter()
                .map(|(name, text)| format!("{name} message. {text}"))
                .collect(),
            truth: Arc::new(truth),
        }
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn context_dim(&self) -> usize {
        ContextEncoder::full(&self.spec).dim()
    }

    /// Dimension of the joint context-arm encoding.
    pub fn model_dim(&self) -> usize {
        self.num_arms() * self.context_dim()
    }

    /// Arms as one-hot item features for the hidden utility.
    pub fn arm_items(&self) -> Arc<Vec<ItemFeatures>> {
        let k = self.num_arms();
        Arc::new(
            (0..k)
                .map(|a| ItemFeatures::new((0..k).map(|j| f64::from(u8::from(j == a))).collect()))
                .collect(),
        )
    }

    pub fn true_rewards(&self, user: &SyntheticUser) -> Vec<f64> {
        self.arm_items()
            .iter()
            .map(|f| self.truth.probability(&user.context, f))
            .collect()
    }

    pub fn oracle(&self, users: &[SyntheticUser], noise: f64) -> Result<BernoulliOracle> {
        simulated_oracle(self.truth.clone(), users, self.arm_items(), noise)
    }

    /// Evaluation environment whose rewards are the hidden probabilities.
    pub fn environment(&self, users: &[SyntheticUser], feedback: Feedback) -> Result<StandardEnvironment> {
        let items = self.arm_items();
        StandardEnvironment::new(
            users
                .iter()
                .map(|u| StandardUser {
                    context: u.context.clone(),
                    rewards: items.iter().map(|f| self.truth.probability(&u.context, f)).collect(),
                })
                .collect(),
            feedback,
        )
    }
}
