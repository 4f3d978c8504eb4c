use std::collections::HashMap;

use rand::RngCore;

use super::{Choice, OracleError, PairQuery, PreferenceOracle};

/// Answers from recorded human choices.
///
/// Choices are keyed by `(user, first item, second item)` as presented in the
/// log. A query with the pair in the opposite order gets the same item, so
/// the answer label follows the content.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    choices: HashMap<(u64, usize, usize), Choice>,
}

impl ReplayOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, user: u64, first: usize, second: usize, choice: Choice) {
        self.choices.insert((user, first, second), choice);
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn lookup(&self, user: u64, first: usize, second: usize) -> Option<Choice> {
        self.choices
            .get(&(user, first, second))
            .copied()
            .or_else(|| self.choices.get(&(user, second, first)).map(|c| c.flipped()))
    }
}

impl FromIterator<(u64, usize, usize, Choice)> for ReplayOracle {
    fn from_iter<I: IntoIterator<Item = (u64, usize, usize, Choice)>>(iter: I) -> Self {
        let mut oracle = Self::new();
        for (user, first, second, choice) in iter {
            oracle.record(user, first, second, choice);
        }
        oracle
    }
}

impl PreferenceOracle for ReplayOracle {
    fn id(&self) -> String {
        "replay".into()
    }

    fn prefer(&self, query: &PairQuery<'_>, _rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
        self.lookup(query.user_id, query.first.id, query.second.id)
            .ok_or_else(|| {
                OracleError::QueryFailure(format!(
                    "no recorded choice for user {} on items ({}, {})",
                    query.user_id, query.first.id, query.second.id
                ))
            })
    }
}
