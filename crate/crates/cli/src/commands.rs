use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pisa_core::data::{
    build_vocabulary, read_catalog, read_events, sessionize, write_catalog, write_events, Catalog, Session, Split, DAY_SECONDS,
};
use pisa_core::experiments::{
    category_csv, render_table, report_csv, roc_csv, run_experiment, trace_csv, universe_embedding, ExperimentConfig, Protocol,
};
use pisa_core::metrics::{auc, average_precision, delong_test, roc_curve, ScoredSet};
use pisa_core::models::{
    encode_sessions, load_component, load_predictor, resolve_items, score_sessions, train_embedding_component, train_predictor,
    ContentFeatures, EmbedTrainReport, IdMaps, ModelFile, ModelKind, Predictor, PredictorBundle, SessionModel,
};
use pisa_core::serial::{csv_f64, to_canonical_string};
use pisa_core::synth::{bayes_oracle_auc, generate_catalog, generate_sessions, GeneratorConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::OutDir;
use crate::Usage;

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    if !path.is_file() {
        return Err(Usage(format!("{what} file not found: {}", path.display())).into());
    }
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    Ok(read_catalog(open(path, "catalog")?).map_err(|e| e.context(path.display()))?)
}

pub fn load_sessions(path: &Path) -> Result<Vec<Session>> {
    let events = read_events(open(path, "events")?).map_err(|e| e.context(path.display()))?;
    Ok(sessionize(&events, DAY_SECONDS))
}

fn n_categories(cfg: &RunConfig, catalog: &Catalog) -> usize {
    cfg.experiment.n_categories.unwrap_or(catalog.max_category() as usize)
}

fn embed_log_csv(report: &EmbedTrainReport) -> String {
    let mut out = String::from("epoch,train_loss,train_accuracy,holdout_accuracy\n");
    for e in &report.epochs {
        let _ =
            writeln!(out, "{},{},{},{}", e.epoch, csv_f64(e.train_loss), csv_f64(e.train_accuracy), csv_f64(e.holdout_accuracy));
    }
    out
}

#[derive(Serialize)]
struct GeneratorSummary {
    config: GeneratorConfig,
    items: usize,
    test_only_items: usize,
    sessions: usize,
    events: usize,
    buy_rate: f64,
    intercept: f64,
    oracle_auc: f64,
}

pub fn gen_data(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    out.guard(&["catalog.tsv", "events.tsv", "generator.json"])?;
    let gen = cfg.generator();
    let cat = generate_catalog(&gen)?;
    let s = generate_sessions(&cat, &gen)?;
    let mut catalog_bytes = Vec::new();
    write_catalog(&cat.catalog, &mut catalog_bytes)?;
    let mut event_bytes = Vec::new();
    write_events(&s.events, &mut event_bytes)?;
    out.write("catalog.tsv", catalog_bytes)?;
    out.write("events.tsv", event_bytes)?;
    let buys = s.sessions.iter().filter(|x| x.label).count();
    let summary = GeneratorSummary {
        config: gen,
        items: cat.catalog.len(),
        test_only_items: cat.test_only.len(),
        sessions: s.sessions.len(),
        events: s.events.len(),
        buy_rate: buys as f64 / s.sessions.len() as f64,
        intercept: s.intercept,
        oracle_auc: bayes_oracle_auc(&s.sessions, &s.probabilities)?,
    };
    out.write("generator.json", to_canonical_string(&summary)?)?;
    println!(
        "{} items, {} sessions, {} events, buy rate {:.4}, oracle AUC {:.4}",
        summary.items, summary.sessions, summary.events, summary.buy_rate, summary.oracle_auc
    );
    Ok(())
}

pub fn train_embed(cfg: &RunConfig, out: &OutDir) -> Result<()> {
    out.guard(&["embedding.json", "embedding_log.csv"])?;
    let catalog = load_catalog(&cfg.paths.catalog())?;
    let texts: Vec<String> = catalog.records().map(|r| r.text()).collect();
    let vocab = build_vocabulary(texts.iter().map(String::as_str), cfg.experiment.min_freq)?;
    let items = resolve_items(&catalog, &vocab);
    let (component, report) =
        train_embedding_component(&items, vocab.len(), n_categories(cfg, &catalog), &cfg.dims, &cfg.embed_config())?;
    out.write("embedding.json", to_canonical_string(&ModelFile::from_component(&component, &vocab, &cfg.dims)?)?)?;
    out.write("embedding_log.csv", embed_log_csv(&report))?;
    let best = report.best();
    println!(
        "held-out category accuracy {:.4} at epoch {} ({} held-out items)",
        best.holdout_accuracy, best.epoch, report.holdout_items
    );
    Ok(())
}

fn split_of(exp: &ExperimentConfig, sessions: &[Session]) -> Result<Split> {
    let split = exp.split(sessions)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    Ok(split)
}

pub fn train(cfg: &RunConfig, out: &OutDir, kind: ModelKind) -> Result<()> {
    let model_file = format!("model_{kind}.json");
    let trace_file = format!("trace_{kind}.csv");
    out.guard(&[&model_file, &trace_file])?;
    let catalog = load_catalog(&cfg.paths.catalog())?;
    let sessions = load_sessions(&cfg.paths.events())?;
    let exp = cfg.experiment(n_categories(cfg, &catalog));
    let split = split_of(&exp, &sessions)?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(pisa_core::Error::Data("training and validation days must both hold sessions".into()).into());
    }

    let features = if kind.uses_content() {
        let (component, vocab) = match &cfg.paths.embedding {
            Some(p) => {
                let (c, v, _) = load_component(p).map_err(|e| e.context(p.display()))?;
                (c, v)
            }
            None => {
                let (c, v, report) = universe_embedding(&split.train, &catalog, &exp, cfg.seed)?;
                log::info!("embedding held-out accuracy {:.4}", report.best().holdout_accuracy);
                (c, v)
            }
        };
        Some(ContentFeatures::new(component, vocab, &catalog)?)
    } else {
        None
    };
    let ids = kind.uses_ids().then(|| IdMaps::from_sessions(&split.train));
    let item_dim = features.as_ref().map_or(cfg.dims.item_dim, |f| f.dim());
    let encode = |s: &[Session]| encode_sessions(s, exp.max_len, features.as_ref(), ids.as_ref());
    let (train_enc, val_enc) = (encode(&split.train)?, encode(&split.validation)?);
    let model = Predictor::new(kind, &cfg.dims, item_dim, ids.as_ref(), cfg.seed)?;
    let outcome = train_predictor(model, &train_enc, &val_enc, &cfg.train_config())?;
    let best_val_auc = outcome.best_val_auc();
    let bundle = PredictorBundle {
        predictor: outcome.model,
        dims: cfg.dims,
        max_len: exp.max_len,
        id_maps: ids,
        embedding: features.map(|f| (f.component, f.vocabulary)),
    };
    out.write(&model_file, to_canonical_string(&ModelFile::from_predictor(&bundle)?)?)?;
    out.write(&trace_file, trace_csv(&outcome.trace))?;
    println!("{kind}: best epoch {} with validation AUC {best_val_auc:.4}", outcome.best_epoch);
    Ok(())
}

#[derive(Serialize)]
struct EvaluatedModel {
    file: String,
    model: ModelKind,
    auc: f64,
    average_precision: f64,
    prevalence: f64,
    roc_file: String,
}

#[derive(Serialize)]
struct DeLongEntry {
    a: usize,
    b: usize,
    auc_a: f64,
    auc_b: f64,
    z: f64,
    p_value: f64,
}

#[derive(Serialize)]
struct Evaluation {
    test_sessions: usize,
    models: Vec<EvaluatedModel>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    delong: Vec<DeLongEntry>,
}

pub fn evaluate(cfg: &RunConfig, out: &OutDir, files: &[PathBuf]) -> Result<()> {
    out.guard(&["evaluation.json", "evaluation.txt"])?;
    let catalog = load_catalog(&cfg.paths.catalog())?;
    let sessions = load_sessions(&cfg.paths.events())?;
    let split = split_of(&cfg.experiment(n_categories(cfg, &catalog)), &sessions)?;
    let labels: Vec<bool> = split.test.iter().map(|s| s.label).collect();

    let mut models = Vec::new();
    let mut all_scores = Vec::new();
    for (i, file) in files.iter().enumerate() {
        if !file.is_file() {
            return Err(Usage(format!("model file not found: {}", file.display())).into());
        }
        let bundle = load_predictor(file, None).map_err(|e| e.context(file.display()))?;
        let features = match &bundle.embedding {
            Some((c, v)) => Some(ContentFeatures::new(c.clone(), v.clone(), &catalog)?),
            None => None,
        };
        let enc = encode_sessions(&split.test, bundle.max_len, features.as_ref(), bundle.id_maps.as_ref())?;
        let scores = score_sessions(&bundle.predictor, &enc)?;
        let set = ScoredSet::new(scores.clone(), labels.clone())?;
        let stem = file.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        let roc_file = format!("roc_{}_{stem}.csv", i + 1);
        out.write(&roc_file, roc_csv(&roc_curve(&set)?))?;
        models.push(EvaluatedModel {
            file: file.display().to_string(),
            model: bundle.predictor.kind(),
            auc: auc(&set)?,
            average_precision: average_precision(&set)?,
            prevalence: set.prevalence(),
            roc_file,
        });
        all_scores.push(scores);
    }
    let mut delong = Vec::new();
    for a in 0..all_scores.len() {
        for b in a + 1..all_scores.len() {
            let r = delong_test(&all_scores[a], &all_scores[b], &labels)?;
            delong.push(DeLongEntry { a: a + 1, b: b + 1, auc_a: r.auc_a, auc_b: r.auc_b, z: r.z, p_value: r.p_value });
        }
    }
    let eval = Evaluation { test_sessions: split.test.len(), models, delong };
    let mut text = format!("{} test sessions\n", eval.test_sessions);
    for (i, m) in eval.models.iter().enumerate() {
        let _ = writeln!(
            text,
            "[{}] {} ({}): AUC {:.4}, AP {:.4}, prevalence {:.4}",
            i + 1,
            m.file,
            m.model,
            m.auc,
            m.average_precision,
            m.prevalence
        );
    }
    if !eval.delong.is_empty() {
        text.push_str("DeLong\n");
        for d in &eval.delong {
            let _ = writeln!(text, "[{}] vs [{}]: z={:.3} p={:.4}", d.a, d.b, d.z, d.p_value);
        }
    }
    out.write("evaluation.json", to_canonical_string(&eval)?)?;
    out.write("evaluation.txt", &text)?;
    print!("{text}");
    Ok(())
}

pub fn experiment(cfg: &RunConfig, out: &OutDir, protocol: &Protocol) -> Result<()> {
    out.guard(&["report.json", "report.csv", "report.txt"])?;
    let catalog = load_catalog(&cfg.paths.catalog())?;
    let sessions = load_sessions(&cfg.paths.events())?;
    let exp = cfg.experiment(n_categories(cfg, &catalog));
    let result = run_experiment(protocol, &catalog, &sessions, &exp)?;
    let report = &result.report;
    for (i, c) in result.conditions.iter().enumerate() {
        let prefix = format!("condition_{i}");
        if let Some((comp, v)) = c.models.iter().find_map(|m| m.embedding.as_ref()) {
            out.write(
                &format!("{prefix}/embedding.json"),
                to_canonical_string(&ModelFile::from_component(comp, v, &exp.dims)?)?,
            )?;
        }
        out.write(&format!("{prefix}/embedding_log.csv"), embed_log_csv(&c.embedding))?;
        out.write(&format!("{prefix}/categories.csv"), category_csv(&c.categories))?;
        for bundle in &c.models {
            let kind = bundle.predictor.kind();
            out.write(&format!("{prefix}/model_{kind}.json"), to_canonical_string(&ModelFile::from_predictor(bundle)?)?)?;
        }
        for (kind, roc) in &c.rocs {
            out.write(&format!("{prefix}/roc_{kind}.csv"), roc_csv(roc))?;
        }
        for (kind, trace) in &c.traces {
            out.write(&format!("{prefix}/trace_{kind}.csv"), trace_csv(trace))?;
        }
    }
    let table = render_table(report);
    out.write("report.json", to_canonical_string(report)?)?;
    out.write("report.csv", report_csv(report))?;
    out.write("report.txt", &table)?;
    print!("{table}");
    Ok(())
}
