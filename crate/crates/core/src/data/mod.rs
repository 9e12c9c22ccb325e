//! Catalog and clickstream representation.

mod catalog;
mod events;
mod padding;
mod split;
mod tokenize;
mod vocab;

use serde::{Deserialize, Serialize};

pub use catalog::{item_text, read_catalog, write_catalog, Catalog, CatalogRecord, Item};
pub use events::{read_events, sessionize, write_events, ClickEvent, Event, EventKind, Session, DAY_SECONDS};
pub use padding::{pad_or_prune, PaddedSequence, DEFAULT_MAX_LEN};
pub use split::{chronological_split, Split};
pub use tokenize::tokenize;
pub use vocab::{build_vocabulary, Vocabulary, OOV, PAD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

/// Item category, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(pub u32);

impl CategoryId {
    /// Zero-based class index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        CategoryId(i as u32 + 1)
    }
}

impl std::fmt::Display for ItemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::fmt::Display for CategoryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}
