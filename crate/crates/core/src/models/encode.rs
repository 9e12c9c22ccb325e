use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::component::ContentFeatures;
use crate::data::{pad_or_prune, ItemId, Session, UserId};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::parallel;

/// Maps raw ids to embedding rows. The first `reserved` rows are special
/// (PAD/UNKNOWN for items, UNKNOWN for users); known ids follow in
/// ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "IdIndexRepr", into = "IdIndexRepr")]
pub struct IdIndex {
    reserved: usize,
    ids: Vec<u64>,
    rows: BTreeMap<u64, usize>,
}

#[derive(Serialize, Deserialize)]
struct IdIndexRepr {
    reserved: usize,
    ids: Vec<u64>,
}

impl From<IdIndexRepr> for IdIndex {
    fn from(r: IdIndexRepr) -> Self {
        IdIndex::new(r.reserved, r.ids)
    }
}

impl From<IdIndex> for IdIndexRepr {
    fn from(i: IdIndex) -> Self {
        IdIndexRepr { reserved: i.reserved, ids: i.ids }
    }
}

impl IdIndex {
    pub fn new(reserved: usize, ids: impl IntoIterator<Item = u64>) -> Self {
        let ids: Vec<u64> = ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let rows = ids.iter().enumerate().map(|(i, &id)| (id, reserved + i)).collect();
        IdIndex { reserved, ids, rows }
    }

    /// Total rows including the reserved ones.
    pub fn rows(&self) -> usize {
        self.reserved + self.ids.len()
    }

    pub fn known(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, id: u64) -> Option<usize> {
        self.rows.get(&id).copied()
    }
}

/// Item row 0 is PAD, row 1 is UNKNOWN.
pub const ITEM_PAD_ROW: usize = 0;
pub const ITEM_UNKNOWN_ROW: usize = 1;
/// User row 0 is UNKNOWN.
pub const USER_UNKNOWN_ROW: usize = 0;

/// Id vocabularies of the id-based models, built from training sessions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdMaps {
    pub items: IdIndex,
    pub users: IdIndex,
}

impl IdMaps {
    pub fn from_sessions(train: &[Session]) -> Self {
        IdMaps {
            items: IdIndex::new(2, train.iter().flat_map(|s| s.items().map(|i| i.0))),
            users: IdIndex::new(1, train.iter().map(|s| s.user_id.0)),
        }
    }

    pub fn item_row(&self, id: Option<ItemId>) -> usize {
        match id {
            None => ITEM_PAD_ROW,
            Some(id) => self.items.row(id.0).unwrap_or(ITEM_UNKNOWN_ROW),
        }
    }

    pub fn user_row(&self, id: UserId) -> usize {
        self.users.row(id.0).unwrap_or(USER_UNKNOWN_ROW)
    }
}

/// A padded session as row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSession {
    pub session_id: u64,
    pub label: bool,
    /// Rows of [`EncodedSessions::content_rows`]; empty without content features.
    pub content_slots: Vec<u32>,
    /// Item-id embedding rows; empty without id maps.
    pub id_slots: Vec<u32>,
    pub user: u32,
}

/// Sessions ready for batching. `content_rows` holds the item vectors the
/// content slots point at; row 0 is the zero PAD vector.
#[derive(Clone, Debug)]
pub struct EncodedSessions {
    pub max_len: usize,
    pub content_rows: Matrix,
    pub sessions: Vec<EncodedSession>,
}

impl EncodedSessions {
    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.sessions.iter().map(|s| s.label).collect()
    }
}

/// Pads or prunes every session to `max_len` and resolves its slots against
/// the content features and id maps that are supplied.
pub fn encode_sessions(
    sessions: &[Session],
    max_len: usize,
    content: Option<&ContentFeatures>,
    ids: Option<&IdMaps>,
) -> Result<EncodedSessions> {
    let padded = sessions.iter().map(|s| pad_or_prune(&s.item_ids(), max_len)).collect::<Result<Vec<_>>>()?;

    let (content_rows, content_index) = match content {
        Some(features) => {
            let unique: Vec<ItemId> = padded.iter().flat_map(|p| p.items()).collect::<BTreeSet<_>>().into_iter().collect();
            let vectors = parallel::map(&unique, |&id| features.vector(id));
            let dim = features.dim();
            let mut rows = Matrix::zeros(unique.len() + 1, dim);
            for (r, v) in vectors.into_iter().enumerate() {
                let v = v?;
                if v.len() != dim {
                    return Err(Error::Shape(format!("item vector of length {} instead of {dim}", v.len())));
                }
                rows.row_mut(r + 1).copy_from_slice(&v);
            }
            let index: BTreeMap<ItemId, u32> = unique.iter().enumerate().map(|(r, &id)| (id, r as u32 + 1)).collect();
            (rows, Some(index))
        }
        None => (Matrix::zeros(1, 0), None),
    };

    let encoded = sessions
        .iter()
        .zip(&padded)
        .map(|(s, p)| EncodedSession {
            session_id: s.session_id,
            label: s.label,
            content_slots: match &content_index {
                Some(index) => p.slots.iter().map(|slot| slot.map_or(0, |id| index[&id])).collect(),
                None => Vec::new(),
            },
            id_slots: match ids {
                Some(maps) => p.slots.iter().map(|&slot| maps.item_row(slot) as u32).collect(),
                None => Vec::new(),
            },
            user: ids.map_or(0, |maps| maps.user_row(s.user_id) as u32),
        })
        .collect();
    Ok(EncodedSessions { max_len, content_rows, sessions: encoded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClickEvent;

    fn session(id: u64, user: u64, items: &[u64]) -> Session {
        Session {
            session_id: id,
            user_id: UserId(user),
            clicks: items
                .iter()
                .enumerate()
                .map(|(t, &i)| ClickEvent { item_id: ItemId(i), timestamp: t as i64, user_id: UserId(user) })
                .collect(),
            label: false,
            day: 0,
        }
    }

    #[test]
    fn unknown_ids_use_reserved_rows() {
        let maps = IdMaps::from_sessions(&[session(0, 7, &[10, 11])]);
        assert_eq!(maps.items.rows(), 4);
        let enc = encode_sessions(&[session(1, 8, &[11, 99])], 4, None, Some(&maps)).unwrap();
        let s = &enc.sessions[0];
        assert_eq!(s.id_slots, vec![0, 0, 3, 1]);
        assert_eq!(s.user as usize, USER_UNKNOWN_ROW);
    }

    #[test]
    fn id_index_serde_rebuilds_lookup() {
        let idx = IdIndex::new(2, [5, 3, 9]);
        let text = serde_json::to_string(&idx).unwrap();
        let back: IdIndex = serde_json::from_str(&text).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.row(9), Some(4));
    }
}
