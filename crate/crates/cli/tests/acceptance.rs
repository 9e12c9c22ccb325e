//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Run with `cargo test -p pisa-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pisa_core::data::{pad_or_prune, ItemId, DEFAULT_MAX_LEN};
use pisa_core::experiments::{
    condition_statistics, default_x_list, remove_cold_items, run_experiment, ColdStartConfig, ExperimentConfig, ExperimentOutput,
    Protocol,
};
use pisa_core::metrics::{auc, average_precision, delong_test, ScoredSet};
use pisa_core::models::{gradient_check, Dims, ModelKind, TrainConfig};
use pisa_core::nn::init::seeded_rng;
use pisa_core::synth::{generate_catalog, generate_sessions, GeneratorConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for kind in [ModelKind::EmbeddingComponent, ModelKind::Content, ModelKind::Integrated, ModelKind::Baseline] {
        for seed in 0..20 {
            let r = gradient_check(kind, seed, 1e-5).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
            if r.max_rel_error >= 1e-4 {
                let (a, n) = r.worst_values;
                let (name, k) = r.worst.unwrap_or_default();
                failures.push(format!(
                    "{kind} seed {seed}: relative error {:.2e} at {name}[{k}], analytic {a:.4e} vs numeric {n:.4e}, |diff| {:.1e}",
                    r.max_rel_error,
                    (a - n).abs()
                ));
            }
        }
    }
    let took = start.elapsed();
    check(failures.is_empty(), format!("{}/80 instances at or above 1e-4: {}", failures.len(), failures.join("; ")))?;
    check(took < Duration::from_secs(120), format!("took {took:?}"))?;
    Ok(format!("80 instances, worst relative error {worst:.2e}, {took:.1?}"))
}

fn psi(x: f64, y: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

fn random_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.gen_range(4..=200);
        let grid = rng.gen_range(3..60);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..grid) as f64 / grid as f64).collect();
        let b: Vec<f64> =
            a.iter().map(|&x| if rng.gen_bool(0.3) { rng.gen_range(0..grid) as f64 / grid as f64 } else { x }).collect();
        let rate = rng.gen_range(0.1..0.9);
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(rate)).collect();
        if y.iter().filter(|&&v| v).count() >= 2 && y.iter().filter(|&&v| !v).count() >= 2 {
            return (a, b, y);
        }
    }
}

fn brute_auc(s: &[f64], y: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                pairs += 1;
                twice += (2.0 * psi(s[i], s[j])) as u64;
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Walks the ranking highest score first, ties broken by index.
fn rank_walk_ap(s: &[f64], y: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let (mut hits, mut total) = (0usize, 0.0);
    for (k, &i) in order.iter().enumerate() {
        if y[i] {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    total / hits as f64
}

fn brute_delong_variance(a: &[f64], b: &[f64], y: &[bool]) -> f64 {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    let comps = |s: &[f64]| {
        let v10: Vec<f64> = pos.iter().map(|&i| neg.iter().map(|&j| psi(s[i], s[j])).sum::<f64>() / neg.len() as f64).collect();
        let v01: Vec<f64> = neg.iter().map(|&j| pos.iter().map(|&i| psi(s[i], s[j])).sum::<f64>() / pos.len() as f64).collect();
        (v10, v01)
    };
    let cov = |u: &[f64], v: &[f64]| {
        let (mu, mv) = (u.iter().sum::<f64>() / u.len() as f64, v.iter().sum::<f64>() / v.len() as f64);
        u.iter().zip(v).map(|(x, z)| (x - mu) * (z - mv)).sum::<f64>() / (u.len() - 1) as f64
    };
    let ((a10, a01), (b10, b01)) = (comps(a), comps(b));
    let s10 = cov(&a10, &a10) + cov(&b10, &b10) - 2.0 * cov(&a10, &b10);
    let s01 = cov(&a01, &a01) + cov(&b01, &b01) - 2.0 * cov(&a01, &b01);
    (s10 / pos.len() as f64 + s01 / neg.len() as f64).max(0.0)
}

fn metric_oracles() -> Outcome {
    let mut rng = seeded_rng(2024, 0);
    for k in 0..200 {
        let (s, _, y) = random_instance(&mut rng);
        let set = ScoredSet::new(s.clone(), y.clone()).map_err(|e| e.to_string())?;
        check(auc(&set).unwrap() == brute_auc(&s, &y), format!("AUC mismatch on instance {k}"))?;
        check(average_precision(&set).unwrap() == rank_walk_ap(&s, &y), format!("AP mismatch on instance {k}"))?;
        let same = delong_test(&s, &s, &y).map_err(|e| e.to_string())?;
        check(same.p_value == 1.0, format!("self-comparison p = {} on instance {k}", same.p_value))?;
    }
    let mut worst = 0.0f64;
    for k in 0..50 {
        let (a, b, y) = random_instance(&mut rng);
        let oracle = brute_delong_variance(&a, &b, &y);
        let got = match delong_test(&a, &b, &y) {
            Ok(r) => r.variance,
            Err(pisa_core::Error::DegenerateVariance { .. }) => 0.0,
            Err(e) => return Err(e.to_string()),
        };
        worst = worst.max((got - oracle).abs());
        check((got - oracle).abs() <= 1e-10, format!("DeLong variance {got} vs {oracle} on instance {k}"))?;
    }
    Ok(format!("200 AUC/AP instances exact, 50 DeLong variances within {worst:.1e}"))
}

fn pipeline_exactness() -> Outcome {
    for len in 1..=50u64 {
        let clicks: Vec<ItemId> = (1..=len).map(ItemId).collect();
        let p = pad_or_prune(&clicks, DEFAULT_MAX_LEN).map_err(|e| e.to_string())?;
        let mut expected: Vec<Option<ItemId>> = Vec::new();
        if len < 10 {
            expected.extend(std::iter::repeat_n(None, 10 - len as usize));
            expected.extend(clicks.iter().copied().map(Some));
        } else {
            expected.extend(clicks[len as usize - 10..].iter().copied().map(Some));
        }
        check(p.slots == expected, format!("padding of length {len}: {:?}", p.slots))?;
    }
    let mut checked = 0usize;
    for seed in 1..=3 {
        let gen = GeneratorConfig { seed, n_sessions: 8000, ..GeneratorConfig::default() };
        let cat = generate_catalog(&gen).map_err(|e| e.to_string())?;
        let data = generate_sessions(&cat, &gen).map_err(|e| e.to_string())?;
        let split = ExperimentConfig::default().split(&data.sessions).map_err(|e| e.to_string())?;
        for x in default_x_list().into_iter().chain([1.0]) {
            let (kept, removed) = remove_cold_items(&split.train, &cat.catalog, &ColdStartConfig { removal_fraction: x, seed })
                .map_err(|e| e.to_string())?;
            let kept_ids: BTreeSet<u64> = kept.iter().map(|s| s.session_id).collect();
            for s in &split.train {
                let touches = s.items().any(|i| removed.contains(&i));
                check(
                    touches != kept_ids.contains(&s.session_id),
                    format!("seed {seed} X={x}: session {} misfiled", s.session_id),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!("lengths 1..50 exact, {checked} train sessions checked against removed items"))
}

fn run(gen: &GeneratorConfig, protocol: &Protocol, cfg: &ExperimentConfig) -> Result<ExperimentOutput, String> {
    let cat = generate_catalog(gen).map_err(|e| e.to_string())?;
    let data = generate_sessions(&cat, gen).map_err(|e| e.to_string())?;
    run_experiment(protocol, &cat.catalog, &data.sessions, cfg).map_err(|e| e.to_string())
}

fn acceptance_dims() -> Dims {
    Dims { lstm_hidden: 64, ..Dims::default() }
}

fn all_data(out: &mut Option<ExperimentOutput>) -> Outcome {
    let start = Instant::now();
    let gen = GeneratorConfig {
        n_sessions: 20_000,
        n_days: 8,
        content_signal_strength: 6.0,
        base_buy_rate: 0.05,
        ..GeneratorConfig::default()
    };
    let cfg = ExperimentConfig {
        dims: acceptance_dims(),
        training: TrainConfig { max_epochs: 20, patience: Some(3), ..TrainConfig::default() },
        ..ExperimentConfig::default()
    };
    let result = run(&gen, &Protocol::AllData, &cfg)?;
    let took = start.elapsed();
    let r = &result.report;
    let a = |k| r.metrics(0, k).map(|m| m.auc).unwrap_or(f64::NAN);
    let (content, integrated, baseline) = (a(ModelKind::Content), a(ModelKind::Integrated), a(ModelKind::Baseline));
    let line = format!("content {content:.4}, integrated {integrated:.4}, baseline {baseline:.4}, {took:.0?}");
    let warm = r.conditions[0].stats.cold_sessions == 0;
    *out = Some(result);
    check(warm, "cold test sessions in all-data run")?;
    check(integrated >= baseline - 0.01, format!("integrated below baseline: {line}"))?;
    check(content.min(integrated).min(baseline) >= 0.80, format!("AUC below 0.80: {line}"))?;
    check(took < Duration::from_secs(900), format!("took {took:?}"))?;
    Ok(line)
}

fn cold_start() -> Outcome {
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let gen = GeneratorConfig {
            test_only_fraction: 0.6,
            n_days: 4,
            n_sessions: 24_000,
            n_users: 20_000,
            items_per_category: 40,
            seed,
            ..GeneratorConfig::default()
        };
        let cfg = ExperimentConfig {
            models: vec![ModelKind::Content, ModelKind::Baseline],
            dims: acceptance_dims(),
            training: TrainConfig { max_epochs: 5, ..TrainConfig::default() },
            seed,
            ..ExperimentConfig::default()
        };
        let r = run(&gen, &Protocol::AllData, &cfg)?.report;
        let row = &r.conditions[0];
        let content = r.metrics(0, ModelKind::Content).unwrap().auc;
        let baseline = r.metrics(0, ModelKind::Baseline).unwrap().auc;
        let p = row.delong[0].p_value;
        let line =
            format!("seed {seed}: content {content:.4}, baseline {baseline:.4}, p {p:.1e}, {} test sessions", r.test_sessions);
        check(row.stats.cold_pct == 100.0, format!("{line}: only {:.1}% cold", row.stats.cold_pct))?;
        check(r.test_sessions >= 5000, format!("{line}: too few test sessions"))?;
        check(content >= 0.75, format!("{line}: content below 0.75"))?;
        check((0.45..=0.58).contains(&baseline), format!("{line}: baseline outside [0.45, 0.58]"))?;
        check(content - baseline >= 0.15, format!("{line}: gap below 0.15"))?;
        check(p < 0.01, format!("{line}: not significant"))?;
        lines.push(format!("{content:.3}/{baseline:.3}"));
    }
    Ok(format!("content/baseline per seed {}", lines.join(", ")))
}

fn random_removal() -> Outcome {
    let gen = GeneratorConfig { n_sessions: 12_000, n_days: 8, category_weight: 0.1, ..GeneratorConfig::default() };
    let cfg = ExperimentConfig {
        models: vec![ModelKind::Content, ModelKind::Baseline],
        dims: acceptance_dims(),
        training: TrainConfig { max_epochs: 5, ..TrainConfig::default() },
        ..ExperimentConfig::default()
    };
    let r = run(&gen, &Protocol::RandomRemoval(default_x_list()), &cfg)?.report;
    let mut max_cold = 0.0f64;
    let mut max_gap = f64::MIN;
    for (i, row) in r.conditions.iter().enumerate() {
        let gap = r.metrics(i, ModelKind::Content).unwrap().auc - r.metrics(i, ModelKind::Baseline).unwrap().auc;
        max_cold = max_cold.max(row.stats.cold_pct);
        max_gap = max_gap.max(gap);
        let x = row.stats.removal_fraction.unwrap_or(0.0);
        check(row.stats.cold_pct < 5.0, format!("X={x}: {:.2}% cold", row.stats.cold_pct))?;
        check(gap <= 0.02, format!("X={x}: content exceeds baseline by {gap:.4}"))?;
    }
    Ok(format!("{} conditions, max cold {max_cold:.2}%, max content-baseline gap {max_gap:+.4}", r.conditions.len()))
}

fn monotone_cold() -> Outcome {
    let mut traces = Vec::new();
    for seed in 1..=3 {
        let gen = GeneratorConfig { seed, ..GeneratorConfig::default() };
        let cat = generate_catalog(&gen).map_err(|e| e.to_string())?;
        let data = generate_sessions(&cat, &gen).map_err(|e| e.to_string())?;
        let split = ExperimentConfig::default().split(&data.sessions).map_err(|e| e.to_string())?;
        let stats = condition_statistics(&Protocol::ColdStart(default_x_list()), &split, &cat.catalog, seed)
            .map_err(|e| e.to_string())?;
        let pct: Vec<f64> = stats.iter().map(|s| s.cold_pct).collect();
        check(pct.windows(2).all(|w| w[1] >= w[0]), format!("seed {seed}: {pct:?}"))?;
        traces.push(format!("{:.1}% -> {:.1}%", pct[0], pct[pct.len() - 1]));
    }
    Ok(format!("non-decreasing over 8 fractions, 3 seeds ({})", traces.join(", ")))
}

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = format!(
        "version = \"{}\"\nseed = 5\n[generator]\nn_sessions = 3000\nn_users = 1500\n[dims]\nword_dim = 8\ngru_hidden = 8\nitem_dim = 6\nid_dim = 6\nlstm_hidden = 8\nmerge_dim = 6\n[embedding]\nmax_epochs = 2\n[training]\nmax_epochs = 2\n",
        env!("CARGO_PKG_VERSION")
    );
    std::fs::write(dir.path().join("config.toml"), config).unwrap();
    let pisa = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_pisa"))
            .current_dir(dir.path())
            .env("RUST_LOG", "warn")
            .args(["--config", "config.toml"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        check(o.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    };
    pisa(&["--out", "data", "gen-data"])?;
    for run in ["a", "b"] {
        std::fs::create_dir(dir.path().join(run)).unwrap();
        for f in ["catalog.tsv", "events.tsv"] {
            std::fs::copy(dir.path().join("data").join(f), dir.path().join(run).join(f)).unwrap();
        }
        pisa(&["--out", run, "experiment", "--protocol", "cold-start", "--x-list", "0.2,0.5"])?;
    }
    let (a, b) = (files_under(&dir.path().join("a")), files_under(&dir.path().join("b")));
    check(a.iter().map(|f| &f.0).eq(b.iter().map(|f| &f.0)), "file sets differ")?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        check(x == y, format!("{name} differs between runs"))?;
    }
    let models = a.iter().filter(|f| f.0.contains("model_")).count();
    check(models == 6, format!("expected 6 model files, found {models}"))?;
    Ok(format!("{} files byte-identical across two runs, {models} model files", a.len()))
}

fn imbalance(all: Option<&ExperimentOutput>) -> Outcome {
    let out = all.ok_or("all-data run unavailable")?;
    let labels: Vec<bool> = out.split.test.iter().map(|s| s.label).collect();
    let prevalence = labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64;
    let ap = out.report.metrics(0, ModelKind::Content).ok_or("no content model")?.average_precision;
    let line = format!("content AP {ap:.4} vs prevalence {prevalence:.4} ({:.1}x)", ap / prevalence);
    check(prevalence < 0.1, format!("{line}: data not imbalanced"))?;
    check(ap >= 3.0 * prevalence, line.clone())?;
    Ok(line)
}

fn report(n: usize, name: &str, outcome: Outcome, took: Duration) -> bool {
    match outcome {
        Ok(msg) => {
            println!("criterion {n} {name}: PASS ({msg}) [{took:.1?}]");
            true
        }
        Err(msg) => {
            println!("criterion {n} {name}: FAIL ({msg}) [{took:.1?}]");
            false
        }
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all = None;
    let mut passed = 0;
    let mut timed = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let ok = report(n, name, f(), start.elapsed());
        passed += ok as usize;
    };
    timed(1, "gradient soundness", &mut gradients);
    timed(2, "metric oracles", &mut metric_oracles);
    timed(3, "pipeline exactness", &mut pipeline_exactness);
    timed(4, "all-data reproduction", &mut || all_data(&mut all));
    timed(5, "cold-start reproduction", &mut cold_start);
    timed(6, "random-removal control", &mut random_removal);
    timed(7, "monotone cold fraction", &mut monotone_cold);
    timed(8, "determinism", &mut determinism);
    timed(9, "imbalance handling", &mut || imbalance(all.as_ref()));
    println!("acceptance: {passed}/9 criteria passed");
    if passed != 9 {
        std::process::exit(1);
    }
}
