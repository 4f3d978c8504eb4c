use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{simulated_oracle, HiddenUtility};
use crate::bandit::ItemFeatures;
use crate::data::{
    Attribute, ConjointRow, ConjointSchema, ContextEncoder, ItemAttribute, ItemCatalog, Role,
};
use crate::error::Result;
use crate::generate::{sample_users, SyntheticUser};
use crate::oracle::{simulate_bernoulli_preference, BernoulliOracle, BernoulliUtilityModel};

/// Default number of synthetic users.
pub const VACCINE_USERS: usize = 10_000;
/// Pre-training steps per synthetic user.
pub const VACCINE_STEPS_PER_USER: usize = 2;
/// Tasks per participant in the survey protocol.
pub const TASKS_PER_PARTICIPANT: usize = 5;

const INTERACTION_SD: f64 = 0.25;

/// Population effect of each vaccine feature slot, in catalog order.
const ITEM_WEIGHTS: [f64; 7] = [2.0, 1.0, 0.8, 0.4, 0.6, -0.3, 0.4];

/// Paired-profile vaccine acceptance survey: 17 respondent attributes split
/// into personal and vaccine-related roles, 7 vaccine attributes (576
/// profiles), and a hidden bilinear acceptance utility.
#[derive(Debug, Clone)]
pub struct VaccineScenario {
    pub schema: ConjointSchema,
    pub catalog: ItemCatalog,
    pub truth: Arc<HiddenUtility>,
}

impl VaccineScenario {
    pub fn item_attributes() -> Vec<ItemAttribute> {
        vec![
            ItemAttribute::new("efficacy", &["50%", "70%", "90%"], true),
            ItemAttribute::new("protection_duration", &["1 year", "5 years", "lifetime"], true),
            ItemAttribute::new("major_side_effects", &["1 in 10,000", "1 in 1,000,000"], true),
            ItemAttribute::new("minor_side_effects", &["1 in 10", "1 in 100"], true),
            ItemAttribute::new("fda_approval", &["emergency use authorization", "full approval"], false),
            ItemAttribute::new("origin", &["United States", "United Kingdom", "China", "Russia"], false),
            ItemAttribute::new("endorsement", &["president", "health organization"], false),
        ]
    }

    pub fn user_columns() -> Vec<Attribute> {
        use Role::{Domain, Personal};
        let yes_no = &["yes", "no"];
        vec![
            Attribute::categorical("gender", Personal, &["female", "male", "other"]),
            Attribute::categorical("race", Personal, &["white", "black", "hispanic", "asian", "other"]),
            Attribute::integer("age", Personal, 18, 90),
            Attribute::categorical("region", Personal, &["northeast", "midwest", "south", "west"]),
            Attribute::categorical(
                "income",
                Personal,
                &["under 25k", "25k-50k", "50k-75k", "75k-100k", "over 100k"],
            ),
            Attribute::categorical(
                "religion",
                Personal,
                &["protestant", "catholic", "other christian", "other religion", "none"],
            ),
            Attribute::categorical(
                "political_views",
                Personal,
                &["very liberal", "liberal", "moderate", "conservative", "very conservative"],
            ),
            Attribute::categorical("president_approval", Personal, &["approve", "disapprove"]),
            Attribute::categorical("employment_change", Domain, yes_no),
            Attribute::categorical("work_from_home", Domain, yes_no),
            Attribute::categorical("had_covid", Domain, yes_no),
            Attribute::categorical("knows_hospitalized", Domain, yes_no),
            Attribute::categorical("worst_behind_us", Domain, &["behind us", "yet to come"]),
            Attribute::categorical("flu_vaccine", Domain, yes_no),
            Attribute::categorical("vaccines_safe", Domain, yes_no),
            Attribute::categorical("child_vaccination_required", Domain, yes_no),
            Attribute::categorical("health_insurance", Domain, yes_no),
        ]
    }

    pub fn default_schema() -> ConjointSchema {
        let schema = ConjointSchema {
            participant_column: "respondent".into(),
            task_column: "task".into(),
            choice_column: "chosen".into(),
            delimiter: ',',
            profile_suffixes: ["_1".into(), "_2".into()],
            choice_values: ["1".into(), "2".into()],
            partial_personal: None,
            user_columns: Self::user_columns(),
            item_columns: Self::item_attributes(),
        };
        schema.validate().expect("vaccine schema is valid");
        schema
    }

    pub fn new(truth_seed: u64) -> Self {
        let schema = Self::default_schema();
        let spec = schema.user_spec().expect("valid spec");
        let c = ContextEncoder::full(&spec).dim();
        let catalog = ItemCatalog::full_grid(Self::item_attributes()).expect("valid catalog");
        let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
        let truth = HiddenUtility::with_random_interaction(-1.5, ITEM_WEIGHTS.to_vec(), c, INTERACTION_SD, &mut rng);
        Self {
            schema,
            catalog,
            truth: Arc::new(truth),
        }
    }

    pub fn user_spec(&self) -> crate::data::UserFeatureSpec {
        self.schema.user_spec().expect("validated schema")
    }

    pub fn item_features(&self) -> Arc<Vec<ItemFeatures>> {
        Arc::new(
            (0..self.catalog.len())
                .map(|i| self.catalog.features(i).expect("in range").clone())
                .collect(),
        )
    }

    pub fn oracle(&self, users: &[SyntheticUser], noise: f64) -> Result<BernoulliOracle> {
        simulated_oracle(self.truth.clone(), users, self.item_features(), noise)
    }

    /// A survey of `participants` respondents drawn from the population, each
    /// shown `tasks` uniformly random pairs of distinct profiles. Choices
    /// follow the Bernoulli pairwise model of the hidden utilities.
    pub fn synthetic_log(&self, participants: usize, tasks: usize, seed: u64) -> Result<Vec<ConjointRow>> {
        let users = sample_users(&self.user_spec(), participants, seed)?;
        let items = self.item_features();
        let n = self.catalog.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut rows = Vec::with_capacity(participants * tasks);
        for user in &users {
            for task in 0..tasks {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                let mut utils = BernoulliUtilityModel::new();
                utils.set(user.id, a, self.truth.probability(&user.context, &items[a]))?;
                utils.set(user.id, b, self.truth.probability(&user.context, &items[b]))?;
                let choice = simulate_bernoulli_preference(&utils, user.id, a, b, &mut rng)?;
                rows.push(ConjointRow {
                    participant: format!("R{:05}", user.id + 1),
                    task: task as i64 + 1,
                    features: user.features.clone(),
                    profiles: [
                        self.catalog.levels(a).expect("in range").to_vec(),
                        self.catalog.levels(b).expect("in range").to_vec(),
                    ],
                    choice,
                });
            }
        }
        Ok(rows)
    }
}
