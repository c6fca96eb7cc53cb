mod common;

use std::collections::BTreeMap;

use common::*;
use quantal_market_core::design::{assign_blocks, diagnostics, generate, improve, ChoiceTask, Design, DesignOptions, ImproveOptions};
use quantal_market_core::schema::{AttributeSchema, LevelValue, Product};
use quantal_market_core::Error;

/// One cut, two claims, fixed price and weight.
fn toy_schema() -> AttributeSchema {
    let s = AttributeSchema {
        cuts: vec!["ground".into()],
        price: "price".into(),
        weight: "weight".into(),
        attributes: vec![
            effects("a", &["yes", "no"], "no"),
            effects("b", &["yes", "no"], "no"),
            continuous("weight", &[16.0]),
            continuous("price", &[6.0]),
        ],
    };
    s.validate().unwrap();
    s
}

fn toy_product(a: &str, b: &str) -> Product {
    let mut levels = BTreeMap::new();
    levels.insert("a".to_string(), LevelValue::level(a));
    levels.insert("b".to_string(), LevelValue::level(b));
    levels.insert("weight".to_string(), LevelValue::Value(16.0));
    levels.insert("price".to_string(), LevelValue::Value(6.0));
    Product { cut: "ground".into(), levels }
}

fn toy_design(rows: &[(&str, &str)], alternatives: usize) -> Design {
    let tasks = rows
        .chunks(alternatives)
        .enumerate()
        .map(|(i, c)| ChoiceTask { id: i as u32, block: 0, alternatives: c.iter().map(|(a, b)| toy_product(a, b)).collect() })
        .collect();
    Design { tasks, blocks: 1, seed: 9 }
}

fn pm(l: &str) -> f64 {
    if l == "yes" { 1.0 } else { -1.0 }
}

/// Pearson correlation of the two claims, computed directly from the products.
fn claim_correlation(d: &Design) -> f64 {
    let xs: Vec<(f64, f64)> = d
        .rows()
        .map(|p| {
            let get = |k: &str| match &p.levels[k] {
                LevelValue::Level(l) => pm(l),
                LevelValue::Value(_) => unreachable!(),
            };
            (get("a"), get("b"))
        })
        .collect();
    let n = xs.len() as f64;
    let (ma, mb) = (xs.iter().map(|x| x.0).sum::<f64>() / n, xs.iter().map(|x| x.1).sum::<f64>() / n);
    let cov: f64 = xs.iter().map(|x| (x.0 - ma) * (x.1 - mb)).sum();
    let va: f64 = xs.iter().map(|x| (x.0 - ma).powi(2)).sum();
    let vb: f64 = xs.iter().map(|x| (x.1 - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn single_claim_is_exactly_balanced() {
    let mut s = toy_schema();
    s.attributes.remove(1);
    let d = generate(&s, &DesignOptions { tasks: 8, alternatives: 1, blocks: 1, seed: 4 }).unwrap();
    let diag = diagnostics(&s, &d).unwrap();
    assert_eq!(diag.level_counts["a"]["yes"], 4);
    assert_eq!(diag.level_counts["a"]["no"], 4);
    assert_eq!(diag.max_spread, 0);
}

#[test]
fn generation_is_balanced_and_deterministic() {
    let s = small_schema();
    let opts = DesignOptions { tasks: 40, alternatives: 4, blocks: 10, seed: 21 };
    let a = generate(&s, &opts).unwrap();
    let b = generate(&s, &opts).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate(&s, &DesignOptions { seed: 22, ..opts }).unwrap());
    assert_eq!(a.tasks.len(), 40);
    assert!(a.tasks.iter().all(|t| t.alternatives.len() == 4));
    let diag = diagnostics(&s, &a).unwrap();
    assert!(diag.max_spread <= 1);
    assert_eq!(diag.imbalance, 0);
    assert_eq!(diag.block_sizes.len(), 10);
    assert!(diag.block_sizes.values().all(|n| *n == 4));
    // marbling appears only on roast rows, balanced within them
    let roast = a.rows().filter(|p| p.cut == "roast").count();
    let m = &diag.level_counts["marbling"];
    assert_eq!(m.values().sum::<usize>(), roast);
    assert!(a.rows().filter(|p| p.cut == "ground").all(|p| !p.levels.contains_key("marbling")));
    // per-cut weight levels are balanced within each cut
    for cut in ["ground", "roast"] {
        let w = &diag.level_counts[&format!("weight@{cut}")];
        let (hi, lo) = (w.values().max().unwrap(), w.values().min().unwrap());
        assert!(hi - lo <= 1);
    }
}

#[test]
fn uneven_blocks_are_rejected() {
    let s = small_schema();
    let e = generate(&s, &DesignOptions { tasks: 30, alternatives: 4, blocks: 7, seed: 1 }).unwrap_err();
    assert!(matches!(e, Error::Design(_)));
}

#[test]
fn improvement_never_worsens_and_keeps_balance() {
    let s = small_schema();
    let d = generate(&s, &DesignOptions { tasks: 40, alternatives: 4, blocks: 10, seed: 5 }).unwrap();
    let start = diagnostics(&s, &d).unwrap();
    let mut last = start.max_abs_correlation;
    for iters in [0, 10, 100, 1000, 10_000] {
        let out = improve(&s, &d, &ImproveOptions { max_iters: iters, ..Default::default() }).unwrap();
        let diag = diagnostics(&s, &out).unwrap();
        assert!(diag.max_abs_correlation <= last + 1e-12, "{iters}: {} > {last}", diag.max_abs_correlation);
        assert_eq!(diag.level_counts, start.level_counts);
        last = diag.max_abs_correlation;
    }
    assert!(last < start.max_abs_correlation);
    let none = improve(&s, &d, &ImproveOptions { max_iters: 0, ..Default::default() }).unwrap();
    assert_eq!(none, d);
}

#[test]
fn improvement_matches_exhaustive_best_on_toy() {
    let s = toy_schema();
    // six rows, three of each level: the best attainable |r| is 1/3
    let mut best = f64::INFINITY;
    for mask in 0u32..64 {
        if mask.count_ones() != 3 {
            continue;
        }
        let rows: Vec<(&str, &str)> = (0..6)
            .map(|i| (if i < 3 { "yes" } else { "no" }, if mask >> i & 1 == 1 { "yes" } else { "no" }))
            .collect();
        best = best.min(claim_correlation(&toy_design(&rows, 2)).abs());
    }
    assert!((best - 1.0 / 3.0).abs() < 1e-12);

    let worst = toy_design(&[("yes", "yes"), ("yes", "yes"), ("yes", "yes"), ("no", "no"), ("no", "no"), ("no", "no")], 2);
    assert!((claim_correlation(&worst) - 1.0).abs() < 1e-12);
    let out = improve(&s, &worst, &ImproveOptions::default()).unwrap();
    let r = claim_correlation(&out).abs();
    assert!((r - best).abs() < 1e-12, "{r}");
    assert!((diagnostics(&s, &out).unwrap().max_abs_correlation - best).abs() < 1e-12);
}

#[test]
fn orthogonal_design_is_left_alone() {
    let s = toy_schema();
    let d = toy_design(&[("yes", "yes"), ("yes", "no"), ("no", "yes"), ("no", "no")], 2);
    let diag = diagnostics(&s, &d).unwrap();
    assert_eq!(diag.max_abs_correlation, 0.0);
    let out = improve(&s, &d, &ImproveOptions::default()).unwrap();
    let rows = |d: &Design| d.rows().cloned().collect::<Vec<_>>();
    assert_eq!(rows(&out), rows(&d));
}

#[test]
fn constant_columns_are_flagged() {
    let s = toy_schema();
    let d = toy_design(&[("yes", "yes"), ("no", "yes"), ("yes", "yes"), ("no", "yes")], 2);
    let diag = diagnostics(&s, &d).unwrap();
    assert!(diag.degenerate.contains(&"b.yes".to_string()));
    assert!(diag.degenerate.contains(&"price".to_string()));
    assert_eq!(diag.max_abs_correlation, 0.0);
}

#[test]
fn blocking_preserves_tasks() {
    let s = small_schema();
    let d = small_design(8);
    let re = assign_blocks(&s, &d, 8).unwrap();
    let key = |d: &Design| {
        let mut v: Vec<(u32, Vec<Product>)> = d.tasks.iter().map(|t| (t.id, t.alternatives.clone())).collect();
        v.sort_by_key(|x| x.0);
        v
    };
    assert_eq!(key(&re), key(&d));
    let diag = diagnostics(&s, &re).unwrap();
    assert_eq!(diag.block_sizes.len(), 8);
    assert!(diag.block_sizes.values().all(|n| *n == 5));
    assert!(assign_blocks(&s, &d, 7).is_err());
}

#[test]
fn correlations_are_bounded() {
    let s = small_schema();
    for seed in 0..5 {
        let d = generate(&s, &DesignOptions { tasks: 20, alternatives: 2, blocks: 5, seed }).unwrap();
        let r = diagnostics(&s, &d).unwrap().max_abs_correlation;
        assert!((0.0..=1.0 + 1e-12).contains(&r));
    }
}
