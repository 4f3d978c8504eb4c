//! Disjoint LinUCB with ridge initialization, the joint context/arm feature
//! maps, and pair selection for sleeping bandits.

mod encoding;
mod linucb;
mod sleeping;

pub use encoding::{encode_context_arm, encode_pairwise};
pub use linucb::{LinUcbModel, REINVERT_EVERY};
pub use sleeping::{select_sleeping, SleepingChoice};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("invalid bandit configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("{0}")]
    Usage(String),
    #[error("non-finite value: {0}")]
    Value(String),
}

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// Joint encoding of a context with an arm (or an ordered pair of items).
    FeatureVector
);
real_vector!(
    /// Encoded user context.
    ContextVector
);
real_vector!(
    /// Numeric encoding of one catalog item.
    ItemFeatures
);

impl std::ops::Neg for &FeatureVector {
    type Output = FeatureVector;

    fn neg(self) -> FeatureVector {
        FeatureVector(self.0.iter().map(|v| -v).collect())
    }
}
