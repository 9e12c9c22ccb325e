//! All-data, cold-start and random-removal protocols.
//!
//! Cold-start removal samples `⌊X·n_c⌋` of the items each category has in
//! the training set and drops every training session that clicks one of
//! them. Random removal drops the same number of sessions uniformly, as a
//! control that removes data without creating cold items.

mod categories;
mod report;
mod run;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Catalog, CategoryId, ItemId, Session};
use crate::error::{Error, Result};
use crate::nn::init::seeded_rng;

pub use categories::{modal_category, per_category_report, CategoryReport, CategoryRow};
pub use report::{category_csv, render_category_table, render_table, report_csv, roc_csv, trace_csv};
pub use run::{
    condition_statistics, run_experiment, universe_embedding, ConditionOutput, ConditionRow, ConditionStats, DeLongRow,
    ExperimentConfig, ExperimentOutput, ExperimentReport, ModelMetrics,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", content = "x", rename_all = "kebab-case")]
pub enum Protocol {
    AllData,
    ColdStart(Vec<f64>),
    RandomRemoval(Vec<f64>),
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::AllData => "all-data",
            Protocol::ColdStart(_) => "cold-start",
            Protocol::RandomRemoval(_) => "random-removal",
        }
    }

    /// Builds a protocol from its command-line name and removal fractions.
    pub fn parse(name: &str, xs: &[f64]) -> Result<Self> {
        for &x in xs {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Argument(format!("removal fraction {x} outside [0, 1]")));
            }
        }
        match name {
            "all-data" | "all_data" => Ok(Protocol::AllData),
            "cold-start" | "cold_start" => Ok(Protocol::ColdStart(xs.to_vec())),
            "random-removal" | "random_removal" => Ok(Protocol::RandomRemoval(xs.to_vec())),
            other => Err(Error::Argument(format!("unknown protocol `{other}`"))),
        }
    }

    /// Removal fractions, one per condition; `None` for all-data.
    pub fn conditions(&self) -> Vec<Option<f64>> {
        match self {
            Protocol::AllData => vec![None],
            Protocol::ColdStart(xs) | Protocol::RandomRemoval(xs) => xs.iter().map(|&x| Some(x)).collect(),
        }
    }
}

/// Default removal grid `X ∈ {0.1, ..., 0.8}`.
pub fn default_x_list() -> Vec<f64> {
    (1..=8).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColdStartConfig {
    pub removal_fraction: f64,
    pub seed: u64,
}

/// Items occurring in at least one session.
pub fn item_universe(sessions: &[Session]) -> BTreeSet<ItemId> {
    sessions.iter().flat_map(|s| s.items()).collect()
}

/// Samples, per category, `⌊X·n_c⌋` of the `n_c` items that occur in
/// `train`, and drops every session clicking a sampled item.
///
/// Each category's items are shuffled by a stream that depends only on the
/// seed and the category, and the sample is a prefix of that shuffle, so for
/// a fixed seed the removed sets are nested as `X` grows.
pub fn remove_cold_items(
    train: &[Session],
    catalog: &Catalog,
    cfg: &ColdStartConfig,
) -> Result<(Vec<Session>, BTreeSet<ItemId>)> {
    let x = cfg.removal_fraction;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Argument(format!("removal fraction {x} outside [0, 1]")));
    }
    let universe = item_universe(train);
    let mut per_category: std::collections::BTreeMap<CategoryId, Vec<ItemId>> = Default::default();
    for &id in &universe {
        let record = catalog.get(id).ok_or_else(|| Error::Data(format!("training item {id} is not in the catalog")))?;
        per_category.entry(record.category).or_default().push(id);
    }
    let mut removed = BTreeSet::new();
    for (category, mut items) in per_category {
        let n = (x * items.len() as f64).floor() as usize;
        let mut rng = seeded_rng(cfg.seed, 1000 + u64::from(category.0));
        items.shuffle(&mut rng);
        removed.extend(items.into_iter().take(n));
    }
    let kept = train.iter().filter(|s| !s.items().any(|i| removed.contains(&i))).cloned().collect();
    Ok((kept, removed))
}

/// Drops `n_remove` sessions chosen uniformly; the rest keep their order.
pub fn random_removal(train: &[Session], n_remove: usize, seed: u64) -> Result<Vec<Session>> {
    if n_remove > train.len() {
        return Err(Error::Argument(format!("cannot remove {n_remove} of {} sessions", train.len())));
    }
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(&mut seeded_rng(seed, 2000));
    let dropped: BTreeSet<usize> = idx.into_iter().take(n_remove).collect();
    Ok(train.iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, s)| s.clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionColdness {
    pub session_id: u64,
    /// Clicks whose item never occurs in the training universe.
    pub cold_item_count: usize,
    pub total_items: usize,
    pub is_cold: bool,
    pub cold_ratio: f64,
}

/// Counts each session's clicks on items outside `universe`.
pub fn classify_sessions(test: &[Session], universe: &BTreeSet<ItemId>) -> Vec<SessionColdness> {
    test.iter()
        .map(|s| {
            let total = s.len();
            let cold = s.items().filter(|i| !universe.contains(i)).count();
            SessionColdness {
                session_id: s.session_id,
                cold_item_count: cold,
                total_items: total,
                is_cold: cold >= 1,
                cold_ratio: if total == 0 { 0.0 } else { cold as f64 / total as f64 },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdFilter {
    /// Sessions without any cold item.
    NoCold,
    /// Sessions whose cold ratio is at least the given value.
    MinRatio(f64),
}

/// Ids of the sessions passing `mode`, plus a warning when none do.
pub fn filter_test_by_cold_ratio(coldness: &[SessionColdness], mode: ColdFilter) -> Result<(BTreeSet<u64>, Option<String>)> {
    if let ColdFilter::MinRatio(r) = mode {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Argument(format!("cold ratio threshold {r} outside [0, 1]")));
        }
    }
    let kept: BTreeSet<u64> = coldness
        .iter()
        .filter(|c| match mode {
            ColdFilter::NoCold => c.cold_ratio == 0.0,
            ColdFilter::MinRatio(r) => c.cold_ratio >= r,
        })
        .map(|c| c.session_id)
        .collect();
    let warning = kept.is_empty().then(|| format!("cold-ratio filter {mode:?} keeps no sessions"));
    Ok((kept, warning))
}
