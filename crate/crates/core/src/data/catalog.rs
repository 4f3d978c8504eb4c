use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DataError;
use crate::bandit::ItemFeatures;

/// One item attribute and its levels. Ordered attributes (efficacy,
/// protection duration...) encode as a scaled scalar in `[0, 1]`; nominal
/// ones as their integer level code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAttribute {
    pub name: String,
    pub levels: Vec<String>,
    #[serde(default)]
    pub ordered: bool,
}

impl ItemAttribute {
    pub fn new(name: &str, levels: &[&str], ordered: bool) -> Self {
        Self {
            name: name.to_owned(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
            ordered,
        }
    }

    fn code(&self, level: usize) -> f64 {
        if self.ordered {
            if self.levels.len() > 1 {
                level as f64 / (self.levels.len() - 1) as f64
            } else {
                0.0
            }
        } else {
            level as f64
        }
    }
}

/// A finite set of distinct items described by level assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCatalog {
    attributes: Vec<ItemAttribute>,
    items: Vec<Vec<usize>>,
    features: Vec<ItemFeatures>,
    index: HashMap<Vec<usize>, usize>,
}

impl ItemCatalog {
    fn validate_attributes(attributes: &[ItemAttribute]) -> Result<(), DataError> {
        if attributes.is_empty() {
            return Err(DataError::Config("catalog has no item attributes".into()));
        }
        for a in attributes {
            if a.levels.is_empty() {
                return Err(DataError::Config(format!("item attribute `{}` has no levels", a.name)));
            }
        }
        Ok(())
    }

    /// Catalog of the given level assignments. Duplicates are dropped and
    /// items are sorted by level codes, so construction is idempotent.
    pub fn from_items(attributes: Vec<ItemAttribute>, mut items: Vec<Vec<usize>>) -> Result<Self, DataError> {
        Self::validate_attributes(&attributes)?;
        for item in &items {
            if item.len() != attributes.len() {
                return Err(DataError::data(format!(
                    "item has {} attributes, catalog has {}",
                    item.len(),
                    attributes.len()
                )));
            }
            for (a, &l) in attributes.iter().zip(item) {
                if l >= a.levels.len() {
                    return Err(DataError::data(format!("level {l} out of range for `{}`", a.name)));
                }
            }
        }
        items.sort();
        items.dedup();
        let features = items
            .iter()
            .map(|item| {
                ItemFeatures::new(attributes.iter().zip(item).map(|(a, &l)| a.code(l)).collect())
            })
            .collect();
        let index = items.iter().enumerate().map(|(i, it)| (it.clone(), i)).collect();
        Ok(Self {
            attributes,
            items,
            features,
            index,
        })
    }

    /// Every combination of levels.
    pub fn full_grid(attributes: Vec<ItemAttribute>) -> Result<Self, DataError> {
        Self::validate_attributes(&attributes)?;
        let mut items: Vec<Vec<usize>> = vec![vec![]];
        for a in &attributes {
            items = items
                .into_iter()
                .flat_map(|prefix| {
                    (0..a.levels.len()).map(move |l| {
                        let mut next = prefix.clone();
                        next.push(l);
                        next
                    })
                })
                .collect();
        }
        Self::from_items(attributes, items)
    }

    pub fn attributes(&self) -> &[ItemAttribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Encoding dimension `p`.
    pub fn feature_dim(&self) -> usize {
        self.attributes.len()
    }

    pub fn features(&self, item: usize) -> Option<&ItemFeatures> {
        self.features.get(item)
    }

    pub fn levels(&self, item: usize) -> Option<&[usize]> {
        self.items.get(item).map(Vec::as_slice)
    }

    /// Item id of a level assignment given as attribute values.
    pub fn lookup(&self, values: &[&str]) -> Result<usize, DataError> {
        let levels = self.level_codes(values)?;
        self.index
            .get(&levels)
            .copied()
            .ok_or_else(|| DataError::data(format!("item {values:?} is not in the catalog")))
    }

    pub fn index_of(&self, levels: &[usize]) -> Option<usize> {
        self.index.get(levels).copied()
    }

    pub(crate) fn level_codes(&self, values: &[&str]) -> Result<Vec<usize>, DataError> {
        if values.len() != self.attributes.len() {
            return Err(DataError::data(format!(
                "{} attribute values for {} attributes",
                values.len(),
                self.attributes.len()
            )));
        }
        self.attributes
            .iter()
            .zip(values)
            .map(|(a, v)| {
                a.levels
                    .iter()
                    .position(|l| l == v.trim())
                    .ok_or_else(|| DataError::data(format!("unknown level `{v}` for `{}`", a.name)))
            })
            .collect()
    }

    /// Encodes an item given by attribute values.
    pub fn encode_item(&self, values: &[&str]) -> Result<ItemFeatures, DataError> {
        let id = self.lookup(values)?;
        Ok(self.features[id].clone())
    }

    /// Human-readable description used in prompts.
    pub fn describe(&self, item: usize) -> Option<String> {
        let levels = self.items.get(item)?;
        Some(
            self.attributes
                .iter()
                .zip(levels)
                .map(|(a, &l)| format!("{}: {}", a.name.replace('_', " "), a.levels[l]))
                .collect::<Vec<_>>()
                .join(", "),
        )
    }

    /// Short content hash identifying the catalog.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.attributes).expect("attributes serialize"));
        h.update(serde_json::to_vec(&self.items).expect("items serialize"));
        hex::encode(h.finalize())[..16].to_owned()
    }
}
