//! Seeded synthetic catalog and clickstream with a planted content signal.
//!
//! Each item gets a latent buyability
//! `b_i = α·ℓ_c + (1-α)·(k_i/3)²`, where `ℓ_c` is a per-category level
//! (recognisable from the category's signature words) and `k_i ∈ {0..3}` is
//! the number of buy-signal words in the item's description. A session buys
//! with probability `σ(a + β·mean_i b_i)` over its clicked items. The
//! intercept `a` is solved so the mean probability over the generated
//! sessions equals `base_buy_rate`; with `β = 0` it is exactly
//! `logit(base_buy_rate)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Catalog, CatalogRecord, CategoryId, ClickEvent, Event, EventKind, ItemId, Session, UserId, DAY_SECONDS};
use crate::error::{Error, Result};
use crate::metrics::{auc, ScoredSet};
use crate::nn::init::seeded_rng;
use crate::nn::sigmoid;

const STREAM_LEVELS: u64 = 0;
const STREAM_TEXT: u64 = 1;
const STREAM_SESSIONS: u64 = 2;
const STREAM_LABELS: u64 = 3;
const STREAM_USERS: u64 = 4;
const STREAM_TEST_ONLY: u64 = 5;

/// First item id; ids are consecutive from here.
const FIRST_ITEM_ID: u64 = 1000;
/// Latest session start within its day, leaving room for 14 clicks.
const LAST_START_IN_DAY: i64 = DAY_SECONDS - 6 * 3600;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_categories: usize,
    pub items_per_category: usize,
    /// Total word pool: signature words, buy-signal words and filler.
    pub vocab_size: usize,
    pub signature_words_per_category: usize,
    pub buy_signal_words: usize,
    pub n_users: usize,
    pub n_sessions: usize,
    pub n_days: usize,
    /// Unix time of midnight UTC on the first day.
    pub start_timestamp: i64,
    pub max_session_length: usize,
    /// `P(L = l) ∝ decay^(l-1)` for `l` in `1..=max_session_length`.
    pub length_decay: f64,
    pub base_buy_rate: f64,
    /// β: weight of mean buyability in the session logit.
    pub content_signal_strength: f64,
    /// α: share of buyability carried by the category level.
    pub category_weight: f64,
    /// Category levels are `linspace(0, 1, K)^level_exponent`, shuffled.
    pub level_exponent: f64,
    /// Probability that the next click stays in the current category.
    pub category_stickiness: f64,
    /// Fraction of each category's items that only appear on held-out days.
    pub test_only_fraction: f64,
    /// Number of final days that click test-only items exclusively (when
    /// `test_only_fraction > 0`).
    pub held_out_days: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_categories: 13,
            items_per_category: 10,
            vocab_size: 160,
            signature_words_per_category: 8,
            buy_signal_words: 6,
            n_users: 5000,
            n_sessions: 20_000,
            n_days: 10,
            start_timestamp: 1_470_009_600,
            max_session_length: 14,
            length_decay: 0.8,
            base_buy_rate: 0.05,
            content_signal_strength: 6.0,
            category_weight: 0.7,
            level_exponent: 4.0,
            category_stickiness: 0.9,
            test_only_fraction: 0.0,
            held_out_days: 2,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    fn filler_words(&self) -> usize {
        self.vocab_size.saturating_sub(self.n_categories * self.signature_words_per_category + self.buy_signal_words)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_categories < 2 {
            return fail(format!("need at least 2 categories, got {}", self.n_categories));
        }
        if self.items_per_category == 0 || self.signature_words_per_category == 0 {
            return fail("items_per_category and signature_words_per_category must be positive".into());
        }
        if self.buy_signal_words == 0 {
            return fail("buy_signal_words must be positive".into());
        }
        if self.filler_words() < 4 {
            return fail(format!(
                "vocab_size {} leaves no room for filler after {} signature and {} buy-signal words",
                self.vocab_size,
                self.n_categories * self.signature_words_per_category,
                self.buy_signal_words
            ));
        }
        if self.max_session_length == 0 || self.n_days == 0 || self.n_users == 0 {
            return fail("max_session_length, n_days and n_users must be positive".into());
        }
        for (name, v) in [
            ("base_buy_rate", self.base_buy_rate),
            ("category_weight", self.category_weight),
            ("category_stickiness", self.category_stickiness),
            ("test_only_fraction", self.test_only_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.base_buy_rate <= 0.0 || self.base_buy_rate >= 1.0 {
            return fail("base_buy_rate must lie strictly between 0 and 1".into());
        }
        if !(self.length_decay > 0.0) || !(self.content_signal_strength >= 0.0) || !(self.level_exponent > 0.0) {
            return fail("length_decay and level_exponent must be positive, content_signal_strength non-negative".into());
        }
        if self.test_only_fraction > 0.0 && self.held_out_days >= self.n_days {
            return fail("held_out_days must leave at least one training day".into());
        }
        Ok(())
    }
}

/// Generated catalog plus the latent quantities behind it.
#[derive(Clone, Debug)]
pub struct SyntheticCatalog {
    pub catalog: Catalog,
    pub buyability: BTreeMap<ItemId, f64>,
    /// Buy-signal word count `k_i` per item.
    pub buy_words: BTreeMap<ItemId, usize>,
    /// Category level `ℓ_c`, indexed by zero-based category.
    pub category_levels: Vec<f64>,
    pub test_only: BTreeSet<ItemId>,
}

/// Generated sessions, their event stream and true buy probabilities.
#[derive(Clone, Debug)]
pub struct SyntheticSessions {
    pub sessions: Vec<Session>,
    /// True buy probability per session, aligned with `sessions`.
    pub probabilities: Vec<f64>,
    pub events: Vec<Event>,
    pub intercept: f64,
}

fn signature_word(category: usize, j: usize) -> String {
    format!("s{category}w{j}")
}

fn buy_word(j: usize) -> String {
    format!("b{j}")
}

fn filler_word(j: usize) -> String {
    format!("f{j}")
}

/// Builds the catalog: disjoint signature words per category, shared filler
/// and buy-signal words, titles of 1-4 tokens and descriptions of 6-16.
pub fn generate_catalog(cfg: &GeneratorConfig) -> Result<SyntheticCatalog> {
    cfg.validate()?;
    let k = cfg.n_categories;
    let mut level_rng = seeded_rng(cfg.seed, STREAM_LEVELS);
    let mut levels: Vec<f64> = (0..k).map(|c| (c as f64 / (k - 1) as f64).powf(cfg.level_exponent)).collect();
    levels.shuffle(&mut level_rng);

    let mut rng = seeded_rng(cfg.seed, STREAM_TEXT);
    let fillers = cfg.filler_words();
    let pick_word = |rng: &mut rand_chacha::ChaCha8Rng, c: usize| {
        if rng.gen_bool(0.5) {
            signature_word(c, rng.gen_range(0..cfg.signature_words_per_category))
        } else {
            filler_word(rng.gen_range(0..fillers))
        }
    };

    let mut records = Vec::with_capacity(k * cfg.items_per_category);
    let mut buyability = BTreeMap::new();
    let mut buy_words = BTreeMap::new();
    for c in 0..k {
        for j in 0..cfg.items_per_category {
            let id = ItemId(FIRST_ITEM_ID + (c * cfg.items_per_category + j) as u64);
            let title_len = rng.gen_range(1..=4);
            let mut title = vec![signature_word(c, rng.gen_range(0..cfg.signature_words_per_category))];
            for _ in 1..title_len {
                title.push(pick_word(&mut rng, c));
            }
            let desc_len = rng.gen_range(6..=16);
            let n_buy = rng.gen_range(0..=3usize);
            let mut description: Vec<String> = (0..n_buy).map(|_| buy_word(rng.gen_range(0..cfg.buy_signal_words))).collect();
            while description.len() < desc_len {
                description.push(pick_word(&mut rng, c));
            }
            description.shuffle(&mut rng);
            let b = cfg.category_weight * levels[c] + (1.0 - cfg.category_weight) * (n_buy as f64 / 3.0).powi(2);
            buyability.insert(id, b);
            buy_words.insert(id, n_buy);
            records.push(CatalogRecord {
                item_id: id,
                category: CategoryId::from_index(c),
                title: title.join(" "),
                description: description.join(" "),
            });
        }
    }

    let mut test_only = BTreeSet::new();
    if cfg.test_only_fraction > 0.0 {
        let mut to_rng = seeded_rng(cfg.seed, STREAM_TEST_ONLY);
        let n = ((cfg.test_only_fraction * cfg.items_per_category as f64).floor() as usize).max(1);
        let n = n.min(cfg.items_per_category - 1);
        for c in 0..k {
            let ids: Vec<ItemId> =
                (0..cfg.items_per_category).map(|j| ItemId(FIRST_ITEM_ID + (c * cfg.items_per_category + j) as u64)).collect();
            test_only.extend(ids.choose_multiple(&mut to_rng, n).copied());
        }
    }

    Ok(SyntheticCatalog { catalog: Catalog::new(records)?, buyability, buy_words, category_levels: levels, test_only })
}

/// Intercept `a` with `mean σ(a + β·m_j) = base`, found by bisection.
fn calibrate_intercept(means: &[f64], beta: f64, base: f64) -> f64 {
    let logit = (base / (1.0 - base)).ln();
    if beta == 0.0 || means.is_empty() {
        return logit;
    }
    let rate = |a: f64| means.iter().map(|m| sigmoid(a + beta * m)).sum::<f64>() / means.len() as f64;
    let (mut lo, mut hi) = (logit - beta - 1.0, logit + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < base {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws sessions over the catalog. Session starts fall uniformly over
/// `n_days`; users are assigned so that no user starts two sessions within
/// 24h, which makes [`crate::data::sessionize`] recover the sessions exactly
/// from the emitted events.
pub fn generate_sessions(synth: &SyntheticCatalog, cfg: &GeneratorConfig) -> Result<SyntheticSessions> {
    cfg.validate()?;
    if synth.catalog.is_empty() {
        return Err(Error::Data("cannot generate sessions over an empty catalog".into()));
    }
    let k = cfg.n_categories;
    let mut by_category: Vec<Vec<ItemId>> = vec![Vec::new(); k];
    let mut held_out_by_category: Vec<Vec<ItemId>> = vec![Vec::new(); k];
    for r in synth.catalog.records() {
        let c = r.category.index();
        if c >= k {
            return Err(Error::Data(format!("item {} has category {} beyond {k}", r.item_id, r.category)));
        }
        if synth.test_only.contains(&r.item_id) {
            held_out_by_category[c].push(r.item_id);
        } else {
            by_category[c].push(r.item_id);
        }
    }
    let first_held_out_day = if synth.test_only.is_empty() { cfg.n_days } else { cfg.n_days - cfg.held_out_days };

    let length_weights: Vec<f64> = (0..cfg.max_session_length).map(|l| cfg.length_decay.powi(l as i32)).collect();
    let length_total: f64 = length_weights.iter().sum();

    let mut rng = seeded_rng(cfg.seed, STREAM_SESSIONS);
    struct Draft {
        start: i64,
        items: Vec<ItemId>,
        gaps: Vec<i64>,
    }
    let mut drafts = Vec::with_capacity(cfg.n_sessions);
    for _ in 0..cfg.n_sessions {
        let day = rng.gen_range(0..cfg.n_days);
        let start = cfg.start_timestamp + day as i64 * DAY_SECONDS + rng.gen_range(0..LAST_START_IN_DAY);
        let pools = if day >= first_held_out_day { &held_out_by_category } else { &by_category };
        let mut u = rng.gen::<f64>() * length_total;
        let mut len = cfg.max_session_length;
        for (l, w) in length_weights.iter().enumerate() {
            if u < *w {
                len = l + 1;
                break;
            }
            u -= w;
        }
        let nonempty: Vec<usize> = (0..k).filter(|&c| !pools[c].is_empty()).collect();
        let mut category = *nonempty.choose(&mut rng).expect("catalog is non-empty");
        let mut items = Vec::with_capacity(len);
        for step in 0..len {
            if step > 0 && !rng.gen_bool(cfg.category_stickiness) {
                category = *nonempty.choose(&mut rng).expect("non-empty");
            }
            items.push(*pools[category].choose(&mut rng).expect("non-empty pool"));
        }
        let gaps = (0..len).map(|i| if i == 0 { 0 } else { rng.gen_range(30..=300) }).collect();
        drafts.push(Draft { start, items, gaps });
    }
    drafts.sort_by_key(|d| d.start);

    // Assign users: random pick, then the next free user in cyclic order.
    let mut user_rng = seeded_rng(cfg.seed, STREAM_USERS);
    let mut last_start: Vec<Option<i64>> = vec![None; cfg.n_users];
    let mut users = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let first = user_rng.gen_range(0..cfg.n_users);
        let free = (0..cfg.n_users)
            .map(|o| (first + o) % cfg.n_users)
            .find(|&u| last_start[u].is_none_or(|t| d.start > t + DAY_SECONDS))
            .ok_or_else(|| {
                Error::Config(format!("{} users cannot host the session density of the configuration", cfg.n_users))
            })?;
        last_start[free] = Some(d.start);
        users.push(UserId(free as u64 + 1));
    }

    let means: Vec<f64> =
        drafts.iter().map(|d| d.items.iter().map(|i| synth.buyability[i]).sum::<f64>() / d.items.len() as f64).collect();
    let beta = cfg.content_signal_strength;
    let intercept = calibrate_intercept(&means, beta, cfg.base_buy_rate);
    let probabilities: Vec<f64> = means.iter().map(|m| sigmoid(intercept + beta * m)).collect();

    let mut label_rng = seeded_rng(cfg.seed, STREAM_LABELS);
    let mut sessions = Vec::with_capacity(drafts.len());
    let mut events = Vec::new();
    for ((d, &user), &p) in drafts.iter().zip(&users).zip(&probabilities) {
        let label = label_rng.gen::<f64>() < p;
        let buy_pick = label_rng.gen_range(0..d.items.len());
        let mut t = d.start;
        let mut clicks = Vec::with_capacity(d.items.len());
        for (&item, &gap) in d.items.iter().zip(&d.gaps) {
            t += gap;
            clicks.push(ClickEvent { item_id: item, timestamp: t, user_id: user });
            events.push(Event { timestamp: t, user_id: user, item_id: item, kind: EventKind::Click });
        }
        if label {
            events.push(Event { timestamp: t + 60, user_id: user, item_id: d.items[buy_pick], kind: EventKind::Buy });
        }
        sessions.push(Session { session_id: 0, user_id: user, clicks, label, day: d.start.div_euclid(DAY_SECONDS) });
    }

    // Same order and numbering as sessionize.
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&i| (sessions[i].clicks[0].timestamp, sessions[i].user_id));
    let mut sorted_sessions = Vec::with_capacity(sessions.len());
    let mut sorted_probs = Vec::with_capacity(sessions.len());
    for (new_id, &i) in order.iter().enumerate() {
        let mut s = sessions[i].clone();
        s.session_id = new_id as u64;
        sorted_sessions.push(s);
        sorted_probs.push(probabilities[i]);
    }
    events.sort_by_key(|e| (e.timestamp, e.user_id, e.kind == EventKind::Buy));

    Ok(SyntheticSessions { sessions: sorted_sessions, probabilities: sorted_probs, events, intercept })
}

/// AUC of the true generative probability: an upper benchmark for any model.
pub fn bayes_oracle_auc(sessions: &[Session], probabilities: &[f64]) -> Result<f64> {
    if sessions.len() != probabilities.len() {
        return Err(Error::Shape("one probability per session required".into()));
    }
    let set = ScoredSet::new(probabilities.to_vec(), sessions.iter().map(|s| s.label).collect())?;
    auc(&set)
}

/// Oracle AUC restricted to the sessions whose ids are in `ids`.
pub fn bayes_oracle_auc_subset(data: &SyntheticSessions, ids: &BTreeSet<u64>) -> Result<f64> {
    let (s, p): (Vec<Session>, Vec<f64>) = data
        .sessions
        .iter()
        .zip(&data.probabilities)
        .filter(|(s, _)| ids.contains(&s.session_id))
        .map(|(s, &p)| (s.clone(), p))
        .unzip();
    bayes_oracle_auc(&s, &p)
}
