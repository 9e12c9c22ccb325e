use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::categories::{per_category_report, CategoryReport};
use super::{
    classify_sessions, filter_test_by_cold_ratio, item_universe, random_removal, remove_cold_items, ColdFilter, ColdStartConfig,
    Protocol,
};
use crate::data::{build_vocabulary, chronological_split, Catalog, Session, Split, Vocabulary, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};
use crate::metrics::{auc, average_precision, delong_test, roc_curve, RocPoint, ScoredSet};
use crate::models::{
    encode_sessions, score_sessions, train_embedding_component, ContentFeatures, Dims, EmbedTrainConfig, EmbedTrainReport,
    EmbeddingComponent, EpochRecord, IdMaps, ModelKind, Predictor, PredictorBundle, TrainConfig,
};
use crate::parallel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub dims: Dims,
    pub embedding: EmbedTrainConfig,
    pub training: TrainConfig,
    pub max_len: usize,
    pub min_freq: usize,
    pub n_categories: usize,
    pub seed: u64,
    /// Defaults to the day before `test_day`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_day: Option<i64>,
    /// Defaults to the last day with sessions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_day: Option<i64>,
    /// Threshold of the "mostly cold" filtered test set.
    pub min_cold_ratio: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: ModelKind::predictors().to_vec(),
            dims: Dims::default(),
            embedding: EmbedTrainConfig::default(),
            training: TrainConfig::default(),
            max_len: DEFAULT_MAX_LEN,
            min_freq: 1,
            n_categories: 13,
            seed: 1,
            val_day: None,
            test_day: None,
            min_cold_ratio: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        if self.models.contains(&ModelKind::EmbeddingComponent) {
            return Err(Error::Config("the embedding component is trained implicitly; list predictors only".into()));
        }
        if self.max_len == 0 || self.min_freq == 0 {
            return Err(Error::Config("max_len and min_freq must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_cold_ratio) {
            return Err(Error::Config(format!("min_cold_ratio {} outside [0, 1]", self.min_cold_ratio)));
        }
        self.dims.validate()?;
        self.training.validate()
    }

    /// Chronological split on the configured (or last two) days.
    pub fn split(&self, sessions: &[Session]) -> Result<Split> {
        let last = sessions.iter().map(|s| s.day).max().ok_or_else(|| Error::Data("no sessions".into()))?;
        let test_day = self.test_day.unwrap_or(last);
        let val_day = self.val_day.unwrap_or(test_day - 1);
        chronological_split(sessions, val_day, test_day)
    }
}

/// Dataset statistics of one condition: removal counts and cold/warm test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removal_fraction: Option<f64>,
    pub removed_items: usize,
    pub removed_sessions: usize,
    pub train_sessions: usize,
    pub train_buy_pct: f64,
    pub cold_sessions: usize,
    pub cold_buy_pct: f64,
    pub warm_sessions: usize,
    pub warm_buy_pct: f64,
    pub cold_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: ModelKind,
    pub auc: f64,
    pub average_precision: f64,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    /// AUC on test sessions without cold items.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_no_cold: Option<f64>,
    /// AUC on test sessions whose cold ratio reaches the configured threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_mostly_cold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeLongRow {
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    #[serde(flatten)]
    pub stats: ConditionStats,
    pub embedding_holdout_accuracy: f64,
    pub models: Vec<ModelMetrics>,
    pub delong: Vec<DeLongRow>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: String,
    pub seed: u64,
    pub test_sessions: usize,
    pub validation_sessions: usize,
    pub conditions: Vec<ConditionRow>,
}

impl ExperimentReport {
    pub fn metrics(&self, condition: usize, model: ModelKind) -> Option<&ModelMetrics> {
        self.conditions.get(condition)?.models.iter().find(|m| m.model == model)
    }
}

/// Everything produced for one condition besides its report row.
#[derive(Clone, Debug)]
pub struct ConditionOutput {
    pub embedding: EmbedTrainReport,
    pub models: Vec<PredictorBundle>,
    pub traces: Vec<(ModelKind, Vec<EpochRecord>)>,
    pub rocs: Vec<(ModelKind, Vec<RocPoint>)>,
    /// Test logits per model, aligned with the test split.
    pub scores: Vec<(ModelKind, Vec<f64>)>,
    pub categories: CategoryReport,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub conditions: Vec<ConditionOutput>,
    pub split: Split,
}

fn buy_pct(sessions: &[&Session]) -> f64 {
    if sessions.is_empty() {
        0.0
    } else {
        100.0 * sessions.iter().filter(|s| s.label).count() as f64 / sessions.len() as f64
    }
}

struct Reduced {
    fraction: Option<f64>,
    removed_items: usize,
    train: Vec<Session>,
}

/// Training set of every condition. Cold-start removal uses the base seed
/// for all fractions, so removed item sets are nested; random removal
/// matches the session count of the cold-start run at the same fraction.
fn reduce(protocol: &Protocol, train: &[Session], catalog: &Catalog, seed: u64) -> Result<Vec<Reduced>> {
    protocol
        .conditions()
        .into_iter()
        .enumerate()
        .map(|(i, x)| match (protocol, x) {
            (Protocol::AllData, _) | (_, None) => Ok(Reduced { fraction: None, removed_items: 0, train: train.to_vec() }),
            (Protocol::ColdStart(_), Some(x)) => {
                let (kept, removed) = remove_cold_items(train, catalog, &ColdStartConfig { removal_fraction: x, seed })?;
                Ok(Reduced { fraction: Some(x), removed_items: removed.len(), train: kept })
            }
            (Protocol::RandomRemoval(_), Some(x)) => {
                let (matched, _) = remove_cold_items(train, catalog, &ColdStartConfig { removal_fraction: x, seed })?;
                let kept = random_removal(train, train.len() - matched.len(), seed ^ i as u64)?;
                Ok(Reduced { fraction: Some(x), removed_items: 0, train: kept })
            }
        })
        .collect()
}

fn statistics(index: usize, reduced: &Reduced, original_train: usize, test: &[Session]) -> ConditionStats {
    let universe = item_universe(&reduced.train);
    let coldness = classify_sessions(test, &universe);
    let mut cold = Vec::new();
    let mut warm = Vec::new();
    for (s, c) in test.iter().zip(&coldness) {
        if c.is_cold {
            cold.push(s)
        } else {
            warm.push(s)
        }
    }
    let train_refs: Vec<&Session> = reduced.train.iter().collect();
    ConditionStats {
        index,
        removal_fraction: reduced.fraction,
        removed_items: reduced.removed_items,
        removed_sessions: original_train - reduced.train.len(),
        train_sessions: reduced.train.len(),
        train_buy_pct: buy_pct(&train_refs),
        cold_sessions: cold.len(),
        cold_buy_pct: buy_pct(&cold),
        warm_sessions: warm.len(),
        warm_buy_pct: buy_pct(&warm),
        cold_pct: if test.is_empty() { 0.0 } else { 100.0 * cold.len() as f64 / test.len() as f64 },
    }
}

/// Dataset statistics for every condition of `protocol`, without training.
pub fn condition_statistics(protocol: &Protocol, split: &Split, catalog: &Catalog, seed: u64) -> Result<Vec<ConditionStats>> {
    let reduced = reduce(protocol, &split.train, catalog, seed)?;
    Ok(reduced.iter().enumerate().map(|(i, r)| statistics(i, r, split.train.len(), &split.test)).collect())
}

fn subset_auc(scores: &[f64], labels: &[bool], test: &[Session], keep: &BTreeSet<u64>) -> Option<f64> {
    let idx: Vec<usize> = test.iter().enumerate().filter(|(_, s)| keep.contains(&s.session_id)).map(|(i, _)| i).collect();
    let set = ScoredSet::new(idx.iter().map(|&i| scores[i]).collect(), idx.iter().map(|&i| labels[i]).collect()).ok()?;
    auc(&set).ok()
}

/// Vocabulary and embedding component built from the catalogued items that
/// occur in `train` only, so items first seen later stay unseen by both.
pub fn universe_embedding(
    train: &[Session],
    catalog: &Catalog,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(EmbeddingComponent, Vocabulary, EmbedTrainReport)> {
    let universe = item_universe(train);
    let records: Vec<_> = universe.iter().filter_map(|&id| catalog.get(id)).collect();
    let texts: Vec<String> = records.iter().map(|r| r.text()).collect();
    let vocabulary = build_vocabulary(texts.iter().map(String::as_str), cfg.min_freq)?;
    let items: Vec<_> = records.iter().map(|r| r.resolve(&vocabulary)).collect();
    let embed_cfg = EmbedTrainConfig { seed, ..cfg.embedding.clone() };
    let (component, report) = train_embedding_component(&items, vocabulary.len(), cfg.n_categories, &cfg.dims, &embed_cfg)?;
    Ok((component, vocabulary, report))
}

fn run_condition(
    index: usize,
    reduced: &Reduced,
    split: &Split,
    catalog: &Catalog,
    cfg: &ExperimentConfig,
) -> Result<(ConditionRow, ConditionOutput)> {
    let seed = cfg.seed ^ index as u64;
    let stats = statistics(index, reduced, split.train.len(), &split.test);
    let mut warnings = Vec::new();
    let train = &reduced.train;
    if train.is_empty() {
        return Err(Error::Data("no training sessions left".into()));
    }

    let universe = item_universe(train);
    let (component, vocabulary, embedding) = universe_embedding(train, catalog, cfg, seed)?;

    let needs_content = cfg.models.iter().any(|k| k.uses_content());
    let needs_ids = cfg.models.iter().any(|k| k.uses_ids());
    let features = if needs_content { Some(ContentFeatures::new(component, vocabulary, catalog)?) } else { None };
    let maps = needs_ids.then(|| IdMaps::from_sessions(train));
    let encode = |s: &[Session]| encode_sessions(s, cfg.max_len, features.as_ref(), maps.as_ref());
    let (train_enc, val_enc, test_enc) = (encode(train)?, encode(&split.validation)?, encode(&split.test)?);

    let labels: Vec<bool> = split.test.iter().map(|s| s.label).collect();
    let coldness = classify_sessions(&split.test, &universe);
    let (no_cold, w1) = filter_test_by_cold_ratio(&coldness, ColdFilter::NoCold)?;
    let (mostly_cold, w2) = filter_test_by_cold_ratio(&coldness, ColdFilter::MinRatio(cfg.min_cold_ratio))?;
    warnings.extend(w1.into_iter().chain(w2));

    let train_cfg = TrainConfig { seed, ..cfg.training.clone() };
    let mut output = ConditionOutput {
        embedding: embedding.clone(),
        models: Vec::new(),
        traces: Vec::new(),
        rocs: Vec::new(),
        scores: Vec::new(),
        categories: CategoryReport::default(),
    };
    let mut metrics = Vec::new();
    for &kind in &cfg.models {
        let model = Predictor::new(kind, &cfg.dims, cfg.dims.item_dim, maps.as_ref(), seed)?;
        let outcome = crate::models::train_predictor(model, &train_enc, &val_enc, &train_cfg).map_err(|e| e.context(kind))?;
        let scores = score_sessions(&outcome.model, &test_enc)?;
        let set = ScoredSet::new(scores.clone(), labels.clone())?;
        let auc_no_cold = subset_auc(&scores, &labels, &split.test, &no_cold);
        let auc_mostly_cold = subset_auc(&scores, &labels, &split.test, &mostly_cold);
        for (name, v, ids) in [("no-cold", auc_no_cold, &no_cold), ("mostly-cold", auc_mostly_cold, &mostly_cold)] {
            if v.is_none() && !ids.is_empty() {
                warnings.push(format!("{kind}: AUC undefined on the {name} test subset"));
            }
        }
        metrics.push(ModelMetrics {
            model: kind,
            auc: auc(&set).map_err(|e| e.context(kind))?,
            average_precision: average_precision(&set).map_err(|e| e.context(kind))?,
            best_epoch: outcome.best_epoch,
            best_val_auc: outcome.best_val_auc(),
            auc_no_cold,
            auc_mostly_cold,
        });
        output.rocs.push((kind, roc_curve(&set)?));
        output.traces.push((kind, outcome.trace.clone()));
        output.scores.push((kind, scores));
        output.models.push(PredictorBundle {
            predictor: outcome.model,
            dims: cfg.dims,
            max_len: cfg.max_len,
            id_maps: if kind.uses_ids() { maps.clone() } else { None },
            embedding: if kind.uses_content() {
                features.as_ref().map(|f| (f.component.clone(), f.vocabulary.clone()))
            } else {
                None
            },
        });
    }

    let mut delong = Vec::new();
    for i in 0..output.scores.len() {
        for j in i + 1..output.scores.len() {
            let (ka, sa) = &output.scores[i];
            let (kb, sb) = &output.scores[j];
            let r = delong_test(sa, sb, &labels).map_err(|e| e.context(format!("DeLong {ka} vs {kb}")))?;
            delong.push(DeLongRow { model_a: *ka, model_b: *kb, auc_a: r.auc_a, auc_b: r.auc_b, z: r.z, p_value: r.p_value });
        }
    }
    output.categories = per_category_report(&split.test, catalog, &output.scores)?;

    let row =
        ConditionRow { stats, embedding_holdout_accuracy: embedding.best().holdout_accuracy, models: metrics, delong, warnings };
    Ok((row, output))
}

/// Runs every condition of `protocol`: reduce the training set, retrain the
/// embedding component and each requested model, evaluate on the fixed test
/// day. Conditions run concurrently; results are assembled in condition order.
pub fn run_experiment(
    protocol: &Protocol,
    catalog: &Catalog,
    sessions: &[Session],
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let split = cfg.split(sessions)?;
    if split.test.is_empty() || split.validation.is_empty() {
        return Err(Error::Data(split.warnings.join("; ")));
    }
    let reduced = reduce(protocol, &split.train, catalog, cfg.seed)?;
    let indices: Vec<usize> = (0..reduced.len()).collect();
    let results = parallel::map(&indices, |&i| {
        run_condition(i, &reduced[i], &split, catalog, cfg).map_err(|e| e.context(format!("condition {i}")))
    });
    let mut report = ExperimentReport {
        protocol: protocol.name().to_string(),
        seed: cfg.seed,
        test_sessions: split.test.len(),
        validation_sessions: split.validation.len(),
        conditions: Vec::new(),
    };
    let mut outputs = Vec::new();
    for r in results {
        let (mut row, out) = r?;
        row.warnings.extend(split.warnings.iter().cloned());
        report.conditions.push(row);
        outputs.push(out);
    }
    Ok(ExperimentOutput { report, conditions: outputs, split })
}
