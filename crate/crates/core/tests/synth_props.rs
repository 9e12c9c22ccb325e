//! Generator determinism, calibration and planted-signal strength.

use std::collections::BTreeSet;

use pisa_core::data::{sessionize, tokenize, write_catalog, write_events, DAY_SECONDS};
use pisa_core::synth::*;

fn bytes(cfg: &GeneratorConfig) -> (Vec<u8>, Vec<u8>) {
    let cat = generate_catalog(cfg).unwrap();
    let s = generate_sessions(&cat, cfg).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_catalog(&cat.catalog, &mut a).unwrap();
    write_events(&s.events, &mut b).unwrap();
    (a, b)
}

fn small() -> GeneratorConfig {
    GeneratorConfig { n_sessions: 3000, n_users: 2000, ..GeneratorConfig::default() }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small();
    assert_eq!(bytes(&cfg), bytes(&cfg));
    let other = GeneratorConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(bytes(&cfg).1, bytes(&other).1);
}

#[test]
fn small_catalog_has_disjoint_signatures() {
    let cfg = GeneratorConfig { n_categories: 2, items_per_category: 5, ..GeneratorConfig::default() };
    let cat = generate_catalog(&cfg).unwrap();
    assert_eq!(cat.catalog.len(), 10);
    let words = |c: u32| -> BTreeSet<String> {
        cat.catalog
            .records()
            .filter(|r| r.category.0 == c)
            .flat_map(|r| tokenize(&r.text()))
            .filter(|w| w.starts_with('s'))
            .collect()
    };
    assert!(words(1).is_disjoint(&words(2)));
}

#[test]
fn description_length_near_target() {
    let cfg = GeneratorConfig { items_per_category: 77, ..GeneratorConfig::default() };
    let cat = generate_catalog(&cfg).unwrap();
    assert!(cat.catalog.len() >= 1000);
    let lens: Vec<usize> = cat.catalog.records().map(|r| tokenize(&r.description).len()).collect();
    assert!(lens.iter().all(|&l| (6..=16).contains(&l)));
    assert!(cat.catalog.records().all(|r| (1..=4).contains(&tokenize(&r.title).len())));
    let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
    assert!((9.0..=13.0).contains(&mean), "mean description length {mean}");
}

#[test]
fn zero_signal_matches_base_rate_and_has_no_oracle_skill() {
    let cfg = GeneratorConfig { n_sessions: 50_000, n_users: 20_000, content_signal_strength: 0.0, ..GeneratorConfig::default() };
    let cat = generate_catalog(&cfg).unwrap();
    let s = generate_sessions(&cat, &cfg).unwrap();
    assert!(s.probabilities.iter().all(|&p| (p - cfg.base_buy_rate).abs() < 1e-15));
    let rate = s.sessions.iter().filter(|x| x.label).count() as f64 / s.sessions.len() as f64;
    assert!((rate - 0.05).abs() <= 0.005, "buy rate {rate}");
    let oracle = bayes_oracle_auc(&s.sessions, &s.probabilities).unwrap();
    assert!((0.48..=0.52).contains(&oracle), "oracle {oracle}");
}

#[test]
fn oracle_auc_grows_with_signal() {
    let mut last = 0.0;
    for beta in [0.0, 2.0, 4.0, 8.0] {
        let cfg = GeneratorConfig { n_sessions: 20_000, content_signal_strength: beta, ..GeneratorConfig::default() };
        let cat = generate_catalog(&cfg).unwrap();
        let s = generate_sessions(&cat, &cfg).unwrap();
        let oracle = bayes_oracle_auc(&s.sessions, &s.probabilities).unwrap();
        assert!(oracle >= last, "beta {beta}: {oracle} < {last}");
        let rate = s.sessions.iter().filter(|x| x.label).count() as f64 / s.sessions.len() as f64;
        assert!((rate - 0.05).abs() < 0.01, "beta {beta}: rate {rate}");
        last = oracle;
    }
    assert!(last >= 0.9, "oracle at beta 8: {last}");
}

#[test]
fn events_sessionize_back_to_sessions() {
    let cfg = small();
    let cat = generate_catalog(&cfg).unwrap();
    let s = generate_sessions(&cat, &cfg).unwrap();
    assert_eq!(sessionize(&s.events, DAY_SECONDS), s.sessions);
    let clicks: usize = s.sessions.iter().map(|x| x.len()).sum();
    let buys = s.sessions.iter().filter(|x| x.label).count();
    assert_eq!(s.events.len(), clicks + buys);
    assert!(s.sessions.iter().all(|x| (1..=cfg.max_session_length).contains(&x.len())));
    assert!(s.sessions.iter().any(|x| x.len() > 10));
}

#[test]
fn test_only_items_stay_on_held_out_days() {
    let cfg =
        GeneratorConfig { test_only_fraction: 0.6, n_days: 4, n_sessions: 4000, n_users: 4000, ..GeneratorConfig::default() };
    let cat = generate_catalog(&cfg).unwrap();
    assert_eq!(cat.test_only.len(), 13 * 6);
    let s = generate_sessions(&cat, &cfg).unwrap();
    let first_held_out = (cfg.n_days - cfg.held_out_days) as i64;
    let day0 = s.sessions.iter().map(|x| x.day).min().unwrap();
    for x in &s.sessions {
        let held_out = x.day - day0 >= first_held_out;
        assert!(x.items().all(|i| cat.test_only.contains(&i) == held_out));
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    for cfg in [
        GeneratorConfig { vocab_size: 50, ..GeneratorConfig::default() },
        GeneratorConfig { n_categories: 1, ..GeneratorConfig::default() },
        GeneratorConfig { base_buy_rate: 0.0, ..GeneratorConfig::default() },
        GeneratorConfig { test_only_fraction: 0.5, held_out_days: 10, ..GeneratorConfig::default() },
    ] {
        assert!(matches!(generate_catalog(&cfg), Err(pisa_core::Error::Config(_))), "{cfg:?}");
    }
}
