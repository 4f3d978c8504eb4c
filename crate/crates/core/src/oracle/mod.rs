//! Preference oracles: anything that can answer "which of these two
//! contents would this user prefer".
//!
//! Three implementations ship: a remote chat-completion client
//! ([`LlmOracle`]), a Bernoulli-utility simulator ([`BernoulliOracle`]) and a
//! comparator backed by recorded human choices ([`ReplayOracle`]).

mod balanced;
mod bernoulli;
pub mod llm;
mod parse;
mod replay;
mod template;

pub use balanced::{prefer_balanced, BalancedOutcome};
pub use bernoulli::{
    simulate_bernoulli_preference, BernoulliOracle, BernoulliUtilityModel, UtilitySource,
};
pub use llm::{LlmClient, LlmConfig, LlmOracle, OracleResponse, Parsed};
pub use parse::{parse_llm_answer, AnswerMode};
pub use replay::ReplayOracle;
pub use template::{PromptTemplate, TemplateMode};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which presented position won. `A` is the first presented content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn index(self) -> usize {
        match self {
            Choice::A => 0,
            Choice::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Choice::A
        } else {
            Choice::B
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }
}

/// A content option as seen by an oracle: its arm or item id plus the text
/// shown to a language model.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: usize,
    pub text: &'a str,
}

/// One pairwise question: does `user` prefer `first` or `second`?
#[derive(Debug, Clone, Copy)]
pub struct PairQuery<'a> {
    pub user_id: u64,
    pub persona: &'a str,
    pub first: Candidate<'a>,
    pub second: Candidate<'a>,
    /// Repetition index; lets stochastic remote oracles draw fresh samples
    /// for repeated questions while keeping each sample cacheable.
    pub repeat: u32,
}

impl<'a> PairQuery<'a> {
    pub fn swapped(&self) -> Self {
        Self {
            first: self.second,
            second: self.first,
            ..*self
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    /// The question could not be answered; the caller skips it.
    #[error("query failed: {0}")]
    QueryFailure(String),
    #[error("could not parse answer: {0}")]
    Parse(String),
    #[error("score {0} outside [0, 100]")]
    Range(i64),
    #[error("transient transport error: {0}")]
    Transient(String),
    #[error("oracle configuration error: {0}")]
    Config(String),
    /// Unrecoverable (authentication, malformed endpoint...). Aborts runs.
    #[error("fatal oracle error: {0}")]
    Fatal(String),
}

impl OracleError {
    /// Whether the error should abort the surrounding run instead of being
    /// skipped.
    pub fn is_fatal(&self) -> bool {
        matches!(self, OracleError::Config(_) | OracleError::Fatal(_))
    }
}

pub trait PreferenceOracle: Send + Sync {
    fn id(&self) -> String;

    fn prefer(&self, query: &PairQuery<'_>, rng: &mut dyn RngCore) -> Result<Choice, OracleError>;
}

impl<T: PreferenceOracle + ?Sized> PreferenceOracle for &T {
    fn id(&self) -> String {
        (**self).id()
    }

    fn prefer(&self, query: &PairQuery<'_>, rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
        (**self).prefer(query, rng)
    }
}

impl<T: PreferenceOracle + ?Sized> PreferenceOracle for std::sync::Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn prefer(&self, query: &PairQuery<'_>, rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
        (**self).prefer(query, rng)
    }
}
