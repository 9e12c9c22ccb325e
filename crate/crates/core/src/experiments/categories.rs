use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{tokenize, Catalog, CategoryId, Session};
use crate::error::{Error, Result};
use crate::metrics::{auc, ScoredSet};
use crate::models::ModelKind;

/// Most frequent category among the session's catalogued clicks; ties go to
/// the lowest category id. `None` when no clicked item is in the catalog.
pub fn modal_category(session: &Session, catalog: &Catalog) -> Option<CategoryId> {
    let mut counts: BTreeMap<CategoryId, usize> = BTreeMap::new();
    for id in session.items() {
        if let Some(r) = catalog.get(id) {
            *counts.entry(r.category).or_default() += 1;
        }
    }
    // max_by_key keeps the last maximum, so walk the ids in reverse.
    counts.into_iter().rev().max_by_key(|&(_, n)| n).map(|(c, _)| c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryAuc {
    pub model: ModelKind,
    /// Absent when the category's sessions hold a single class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: CategoryId,
    pub item_count: usize,
    pub mean_description_length: f64,
    pub session_count: usize,
    pub positives: usize,
    pub aucs: Vec<CategoryAuc>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub rows: Vec<CategoryRow>,
    /// Test sessions none of whose items are catalogued.
    pub uncategorized: usize,
}

/// Per-category AUC of each model, grouping test sessions by modal category.
/// `scores` are aligned with `test`.
pub fn per_category_report(test: &[Session], catalog: &Catalog, scores: &[(ModelKind, Vec<f64>)]) -> Result<CategoryReport> {
    for (kind, s) in scores {
        if s.len() != test.len() {
            return Err(Error::Shape(format!("{kind}: {} scores for {} test sessions", s.len(), test.len())));
        }
    }
    let mut items: BTreeMap<CategoryId, (usize, usize)> = BTreeMap::new();
    for r in catalog.records() {
        let e = items.entry(r.category).or_default();
        e.0 += 1;
        e.1 += tokenize(&r.description).len();
    }
    let mut groups: BTreeMap<CategoryId, Vec<usize>> = items.keys().map(|&c| (c, Vec::new())).collect();
    let mut uncategorized = 0;
    for (i, s) in test.iter().enumerate() {
        match modal_category(s, catalog) {
            Some(c) => groups.entry(c).or_default().push(i),
            None => uncategorized += 1,
        }
    }
    let rows = groups
        .into_iter()
        .map(|(category, idx)| {
            let (n_items, words) = items.get(&category).copied().unwrap_or_default();
            let labels: Vec<bool> = idx.iter().map(|&i| test[i].label).collect();
            let aucs = scores
                .iter()
                .map(|(kind, s)| CategoryAuc {
                    model: *kind,
                    auc: ScoredSet::new(idx.iter().map(|&i| s[i]).collect(), labels.clone()).and_then(|set| auc(&set)).ok(),
                })
                .collect();
            CategoryRow {
                category,
                item_count: n_items,
                mean_description_length: if n_items == 0 { 0.0 } else { words as f64 / n_items as f64 },
                session_count: idx.len(),
                positives: labels.iter().filter(|&&l| l).count(),
                aucs,
            }
        })
        .collect();
    Ok(CategoryReport { rows, uncategorized })
}
