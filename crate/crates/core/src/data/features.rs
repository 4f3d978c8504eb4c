use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::bandit::ContextVector;

/// Value of one user attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Integer(i64),
    Category(String),
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Integer(v) => write!(f, "{v}"),
            FeatureValue::Category(s) => f.write_str(s),
        }
    }
}

impl From<&str> for FeatureValue {
    fn from(s: &str) -> Self {
        FeatureValue::Category(s.to_owned())
    }
}

impl From<i64> for FeatureValue {
    fn from(v: i64) -> Self {
        FeatureValue::Integer(v)
    }
}

/// Attribute assignment of one user, in attribute-declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserFeatures(pub Vec<(String, FeatureValue)>);

impl UserFeatures {
    pub fn get(&self, name: &str) -> Option<&FeatureValue> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureValue)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v))
    }
}

impl<K: Into<String>, V: Into<FeatureValue>> FromIterator<(K, V)> for UserFeatures {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Personal,
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical {
        levels: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Integer {
        lo: i64,
        hi: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(default)]
    pub role: Role,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn categorical(name: &str, role: Role, levels: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            role,
            kind: AttributeKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
                weights: None,
            },
        }
    }

    pub fn integer(name: &str, role: Role, lo: i64, hi: i64) -> Self {
        Self {
            name: name.to_owned(),
            role,
            kind: AttributeKind::Integer { lo, hi },
        }
    }

    pub fn with_weights(mut self, w: &[f64]) -> Self {
        if let AttributeKind::Categorical { weights, .. } = &mut self.kind {
            *weights = Some(w.to_vec());
        }
        self
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::Config(format!("attribute `{}`: {msg}", self.name)));
        match &self.kind {
            AttributeKind::Categorical { levels, weights } => {
                if levels.is_empty() {
                    return bad("no levels".into());
                }
                let unique: HashSet<_> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return bad("duplicate levels".into());
                }
                if let Some(w) = weights {
                    if w.len() != levels.len() {
                        return bad(format!("{} weights for {} levels", w.len(), levels.len()));
                    }
                    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return bad("weights must be nonnegative".into());
                    }
                    let total: f64 = w.iter().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return bad(format!("weights sum to {total}, expected 1"));
                    }
                }
            }
            AttributeKind::Integer { lo, hi } => {
                if lo > hi {
                    return bad(format!("empty range {lo}..={hi}"));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureValue {
        match &self.kind {
            AttributeKind::Categorical { levels, weights } => {
                let idx = match weights {
                    None => rng.random_range(0..levels.len()),
                    Some(w) => {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut idx = levels.len() - 1;
                        for (i, wi) in w.iter().enumerate() {
                            acc += wi;
                            if u < acc {
                                idx = i;
                                break;
                            }
                        }
                        idx
                    }
                };
                FeatureValue::Category(levels[idx].clone())
            }
            AttributeKind::Integer { lo, hi } => FeatureValue::Integer(rng.random_range(*lo..=*hi)),
        }
    }
}

/// The population users are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatureSpec {
    pub attributes: Vec<Attribute>,
}

impl UserFeatureSpec {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, DataError> {
        let spec = Self { attributes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.attributes.is_empty() {
            return Err(DataError::Config("feature spec has no attributes".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(DataError::Config(format!("duplicate attribute `{}`", a.name)));
            }
            a.validate()?;
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UserFeatures {
        UserFeatures(
            self.attributes
                .iter()
                .map(|a| (a.name.clone(), a.sample(rng)))
                .collect(),
        )
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    #[default]
    Full,
    NoPersonal,
    OnlyPersonal,
    PartialPersonal,
}

impl MaskKind {
    pub const ALL: [MaskKind; 4] = [
        MaskKind::Full,
        MaskKind::NoPersonal,
        MaskKind::PartialPersonal,
        MaskKind::OnlyPersonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::Full => "full",
            MaskKind::NoPersonal => "no_personal",
            MaskKind::OnlyPersonal => "only_personal",
            MaskKind::PartialPersonal => "partial_personal",
        }
    }
}

impl std::str::FromStr for MaskKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MaskKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| DataError::Config(format!("unknown context mask `{s}`")))
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which user attributes reach the context vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextMask {
    pub kind: MaskKind,
    pub retained: Vec<String>,
}

/// Personal columns kept by the partial-personal mask unless configured.
pub const DEFAULT_PARTIAL_PERSONAL: [&str; 2] = ["age", "gender"];

impl ContextMask {
    pub fn full(spec: &UserFeatureSpec) -> Self {
        Self {
            kind: MaskKind::Full,
            retained: spec.attributes.iter().map(|a| a.name.clone()).collect(),
        }
    }

    /// Resolves a mask kind against the attribute roles. `partial` lists the
    /// personal columns kept by `partial_personal`.
    pub fn resolve(
        kind: MaskKind,
        spec: &UserFeatureSpec,
        partial: &[String],
    ) -> Result<Self, DataError> {
        let by_role = |role: Role| -> Vec<String> {
            spec.attributes
                .iter()
                .filter(|a| a.role == role)
                .map(|a| a.name.clone())
                .collect()
        };
        let retained = match kind {
            MaskKind::Full => return Ok(Self::full(spec)),
            MaskKind::NoPersonal => by_role(Role::Domain),
            MaskKind::OnlyPersonal => by_role(Role::Personal),
            MaskKind::PartialPersonal => {
                let personal = by_role(Role::Personal);
                if partial.is_empty() {
                    return Err(DataError::Config("partial_personal mask keeps no columns".into()));
                }
                for p in partial {
                    if !personal.contains(p) {
                        return Err(DataError::Config(format!(
                            "partial_personal column `{p}` is not a personal column"
                        )));
                    }
                }
                if partial.len() >= personal.len() {
                    return Err(DataError::Config(
                        "partial_personal must keep fewer columns than only_personal".into(),
                    ));
                }
                // Keep schema order.
                personal.into_iter().filter(|p| partial.contains(p)).collect()
            }
        };
        if retained.is_empty() {
            return Err(DataError::Config(format!("mask {kind} retains no columns")));
        }
        Ok(Self { kind, retained })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    /// One-hot over the levels plus a trailing "other" bucket.
    OneHot { name: String, levels: Vec<String> },
    Scaled { name: String, lo: i64, hi: i64 },
}

/// Deterministic one-hot / scaled-numeric context encoding of user features.
#[derive(Debug)]
pub struct ContextEncoder {
    slots: Vec<Slot>,
    dim: usize,
    unseen: AtomicU64,
}

impl Clone for ContextEncoder {
    fn clone(&self) -> Self {
        Self {
            slots: self.slots.clone(),
            dim: self.dim,
            unseen: AtomicU64::new(self.unseen.load(Ordering::Relaxed)),
        }
    }
}

impl ContextEncoder {
    pub fn new(spec: &UserFeatureSpec, mask: &ContextMask) -> Result<Self, DataError> {
        for r in &mask.retained {
            if spec.attribute(r).is_none() {
                return Err(DataError::Config(format!("mask retains unknown column `{r}`")));
            }
        }
        let slots: Vec<Slot> = spec
            .attributes
            .iter()
            .filter(|a| mask.retained.contains(&a.name))
            .map(|a| match &a.kind {
                AttributeKind::Categorical { levels, .. } => Slot::OneHot {
                    name: a.name.clone(),
                    levels: levels.clone(),
                },
                AttributeKind::Integer { lo, hi } => Slot::Scaled {
                    name: a.name.clone(),
                    lo: *lo,
                    hi: *hi,
                },
            })
            .collect();
        let dim = slots
            .iter()
            .map(|s| match s {
                Slot::OneHot { levels, .. } => levels.len() + 1,
                Slot::Scaled { .. } => 1,
            })
            .sum();
        Ok(Self {
            slots,
            dim,
            unseen: AtomicU64::new(0),
        })
    }

    pub fn full(spec: &UserFeatureSpec) -> Self {
        Self::new(spec, &ContextMask::full(spec)).expect("full mask only retains spec columns")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Count of values that fell into an "other" bucket or were clamped.
    pub fn unseen_values(&self) -> u64 {
        self.unseen.load(Ordering::Relaxed)
    }

    pub fn encode(&self, features: &UserFeatures) -> Result<ContextVector, DataError> {
        let mut out = Vec::with_capacity(self.dim);
        for slot in &self.slots {
            match slot {
                Slot::OneHot { name, levels } => {
                    let value = features
                        .get(name)
                        .ok_or_else(|| DataError::Schema(format!("missing column `{name}`")))?;
                    let text = value.to_string();
                    let start = out.len();
                    out.resize(start + levels.len() + 1, 0.0);
                    match levels.iter().position(|l| *l == text) {
                        Some(i) => out[start + i] = 1.0,
                        None => {
                            self.unseen.fetch_add(1, Ordering::Relaxed);
                            tracing::warn!(column = %name, value = %text, "unseen level mapped to other");
                            out[start + levels.len()] = 1.0;
                        }
                    }
                }
                Slot::Scaled { name, lo, hi } => {
                    let value = features
                        .get(name)
                        .ok_or_else(|| DataError::Schema(format!("missing column `{name}`")))?;
                    let v = match value {
                        FeatureValue::Integer(v) => *v,
                        FeatureValue::Category(s) => s.trim().parse::<i64>().map_err(|_| {
                            DataError::Data {
                                line: None,
                                message: format!("column `{name}`: `{s}` is not an integer"),
                            }
                        })?,
                    };
                    if v < *lo || v > *hi {
                        self.unseen.fetch_add(1, Ordering::Relaxed);
                        tracing::warn!(column = %name, value = v, "numeric value clamped to range");
                    }
                    let scaled = if hi == lo {
                        0.0
                    } else {
                        ((v - lo) as f64 / (hi - lo) as f64).clamp(0.0, 1.0)
                    };
                    out.push(scaled);
                }
            }
        }
        Ok(ContextVector::new(out))
    }
}
