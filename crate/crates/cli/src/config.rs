//! Run configuration: one TOML file plus `PISA_<SECTION>_<KEY>` environment
//! overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pisa_core::experiments::{default_x_list, ExperimentConfig, Protocol};
use pisa_core::models::{Dims, EmbedTrainConfig, ModelKind, TrainConfig};
use pisa_core::synth::GeneratorConfig;
use serde::{Deserialize, Serialize};

use crate::Usage;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Defaults to `<out>/catalog.tsv`.
    pub catalog: Option<PathBuf>,
    /// Defaults to `<out>/events.tsv`.
    pub events: Option<PathBuf>,
    pub out: PathBuf,
    /// Pre-trained embedding component for `train`; trained on the fly when unset.
    pub embedding: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { catalog: None, events: None, out: PathBuf::from("out"), embedding: None }
    }
}

impl Paths {
    pub fn catalog(&self) -> PathBuf {
        self.catalog.clone().unwrap_or_else(|| self.out.join("catalog.tsv"))
    }

    pub fn events(&self) -> PathBuf {
        self.events.clone().unwrap_or_else(|| self.out.join("events.tsv"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub models: Vec<ModelKind>,
    pub max_len: usize,
    pub min_freq: usize,
    /// Defaults to the largest category id in the catalog.
    pub n_categories: Option<usize>,
    pub val_day: Option<i64>,
    pub test_day: Option<i64>,
    pub min_cold_ratio: f64,
    pub protocol: String,
    pub x_list: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        ExperimentSection {
            models: base.models,
            max_len: base.max_len,
            min_freq: base.min_freq,
            n_categories: None,
            val_day: None,
            test_day: None,
            min_cold_ratio: base.min_cold_ratio,
            protocol: "all-data".into(),
            x_list: default_x_list(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub paths: Paths,
    pub generator: GeneratorConfig,
    pub dims: Dims,
    pub embedding: EmbedTrainConfig,
    pub training: TrainConfig,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: VERSION.into(),
            seed: 1,
            paths: Paths::default(),
            generator: GeneratorConfig::default(),
            dims: Dims::default(),
            embedding: EmbedTrainConfig::default(),
            training: TrainConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or the defaults), then applies environment overrides.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Usage(format!("cannot read config {}: {e}", p.display())))?;
                let table: toml::Table = toml::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", p.display())))?;
                match table.get("version").and_then(|v| v.as_str()) {
                    Some(v) if v == VERSION => {}
                    Some(v) => return Err(Usage(format!("config version {v} does not match tool version {VERSION}")).into()),
                    None => return Err(Usage(format!("config {} has no version tag", p.display())).into()),
                }
                table
            }
            None => toml::Table::try_from(RunConfig::default()).context("serializing default config")?,
        };
        let mut overrides: Vec<(String, String)> =
            env.into_iter().filter_map(|(k, v)| k.strip_prefix("PISA_").map(|k| (k.to_ascii_lowercase(), v))).collect();
        overrides.sort();
        for (key, raw) in overrides {
            apply_override(&mut table, &key, &raw, true)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e| Usage(format!("invalid configuration: {e}")))?;
        if cfg.version != VERSION {
            return Err(Usage(format!("config version {} does not match tool version {VERSION}", cfg.version)).into());
        }
        Ok(cfg)
    }

    /// Replaces the global seed; every seeded component derives from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig { seed: self.seed, ..self.generator.clone() }
    }

    pub fn embed_config(&self) -> EmbedTrainConfig {
        EmbedTrainConfig { seed: self.seed, ..self.embedding.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.training.clone() }
    }

    pub fn experiment(&self, n_categories: usize) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            models: e.models.clone(),
            dims: self.dims,
            embedding: self.embedding.clone(),
            training: self.training.clone(),
            max_len: e.max_len,
            min_freq: e.min_freq,
            n_categories: e.n_categories.unwrap_or(n_categories),
            seed: self.seed,
            val_day: e.val_day,
            test_day: e.test_day,
            min_cold_ratio: e.min_cold_ratio,
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        Protocol::parse(&self.experiment.protocol, &self.experiment.x_list).map_err(|e| Usage(e.to_string()).into())
    }
}

fn parse_value(raw: &str, existing: Option<&toml::Value>) -> toml::Value {
    if let Some(toml::Value::String(_)) = existing {
        return toml::Value::String(raw.into());
    }
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Resolves `key` (lower case, `_`-joined) against the nested tables, longest
/// section names first, and stores the parsed value. Keys that are unknown
/// inside a section are inserted and left to the typed deserializer to reject.
fn apply_override(table: &mut toml::Table, key: &str, raw: &str, root: bool) -> Result<()> {
    if let Some(existing) = table.get(key) {
        if !existing.is_table() {
            let v = parse_value(raw, Some(existing));
            table.insert(key.into(), v);
            return Ok(());
        }
    }
    let mut sections: Vec<String> = table.iter().filter(|(_, v)| v.is_table()).map(|(k, _)| k.clone()).collect();
    sections.sort_by_key(|k| std::cmp::Reverse(k.len()));
    for name in sections {
        if let Some(rest) = key.strip_prefix(name.as_str()).and_then(|r| r.strip_prefix('_')) {
            let sub = table.get_mut(&name).and_then(|v| v.as_table_mut()).expect("section is a table");
            return apply_override(sub, rest, raw, false);
        }
    }
    if root {
        let known = ["paths", "generator", "dims", "embedding", "training", "experiment"];
        if let Some(section) = known.iter().find(|s| key.starts_with(&format!("{s}_"))) {
            let mut sub = toml::Table::new();
            apply_override(&mut sub, &key[section.len() + 1..], raw, false)?;
            table.insert((*section).into(), toml::Value::Table(sub));
            return Ok(());
        }
        return Err(Usage(format!("unknown configuration override PISA_{}", key.to_ascii_uppercase())).into());
    }
    table.insert(key.into(), parse_value(raw, None));
    Ok(())
}
