use serde::{Deserialize, Serialize};

use super::ItemId;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_LEN: usize = 10;

/// Fixed-length click sequence: `None` slots are padding and always come
/// first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedSequence {
    pub slots: Vec<Option<ItemId>>,
    /// Number of real (non-padding) slots.
    pub original_length: usize,
}

impl PaddedSequence {
    pub fn max_len(&self) -> usize {
        self.slots.len()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.slots.iter().flatten().copied()
    }
}

/// Left-pads short sequences and keeps the `max_len` most recent clicks of
/// long ones.
pub fn pad_or_prune(clicks: &[ItemId], max_len: usize) -> Result<PaddedSequence> {
    if max_len == 0 {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    let kept = &clicks[clicks.len().saturating_sub(max_len)..];
    let mut slots = vec![None; max_len - kept.len()];
    slots.extend(kept.iter().copied().map(Some));
    Ok(PaddedSequence { slots, original_length: kept.len() })
}
