mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use quantal_market_core::covariates::{Field, Population};
use quantal_market_core::likelihood::category_probabilities;
use quantal_market_core::simulate::{forecast, price_grid, price_sweep, seasonal_compare, systematic_utility, Respondents, Scenario};
use quantal_market_core::schema::{LevelValue, Product, Season};
use quantal_market_core::{Model, RespondentProfile};

fn product(cut: &str, price: f64) -> Product {
    let mut levels = BTreeMap::new();
    levels.insert("packaging".to_string(), LevelValue::level("vacuum"));
    if cut == "roast" {
        levels.insert("marbling".to_string(), LevelValue::level("not_marbled"));
    }
    levels.insert("traceable".to_string(), LevelValue::level("yes"));
    levels.insert("use_by".to_string(), LevelValue::Value(7.0));
    levels.insert("weight".to_string(), LevelValue::Value(if cut == "roast" { 48.0 } else { 16.0 }));
    levels.insert("price".to_string(), LevelValue::Value(price));
    Product { cut: cut.into(), levels }
}

fn scenario(cut: &str, season: Season, price: f64) -> Scenario {
    Scenario { season, product: product(cut, price), respondents: Respondents::Profile(RespondentProfile::default()), weight_factor: 1.0 }
}

#[test]
fn forecast_moments() {
    let s = small_schema();
    let m = small_model();
    for cut in ["ground", "roast"] {
        for season in Season::ALL {
            let f = forecast(&s, &m, &scenario(cut, season, 14.0)).unwrap();
            assert!((f.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(f.probabilities.iter().all(|p| *p > 0.0));
            let mut brute = 0.0;
            for (j, p) in f.probabilities.iter().enumerate() {
                brute += j as f64 * p;
            }
            assert!((f.expected_quantity - brute).abs() < 1e-12);
            assert!((0.0..=10.0).contains(&f.expected_quantity));
            assert_eq!(f.zero_purchase, f.probabilities[0]);
            assert_eq!(f.expected_revenue, 14.0 * f.expected_quantity);
        }
    }
}

#[test]
fn utility_is_a_term_sum() {
    let s = small_schema();
    let m = small_model();
    let row = s.build_row(&product("roast", 20.0), Season::Summer).unwrap();
    let w = systematic_utility(&s, &m, &row).unwrap();
    let hand = 1.1 + 0.25 - 0.3 + 0.25 + 0.04 * 7.0 - 0.05 * 20.0;
    assert!((w - hand).abs() < 1e-12);
}

#[test]
fn neutral_model_gives_the_zero_index_distribution() {
    let s = small_schema();
    let mut m: Model = small_model();
    for v in m.params.beta.values_mut() {
        *v = 0.0;
    }
    for v in m.params.asc.values_mut() {
        *v = 0.0;
    }
    for v in m.params.gamma.values_mut() {
        *v = 0.0;
    }
    let f = forecast(&s, &m, &scenario("ground", Season::Summer, 6.0)).unwrap();
    assert_eq!(f.probabilities, category_probabilities(0.0, &GROUND_TAU, 1.0));
    assert_eq!(f.zero_purchase, 0.5);
}

#[test]
fn population_forecast_is_the_mixture_of_profile_forecasts() {
    let s = small_schema();
    let m = small_model();
    let base = RespondentProfile::default();
    let mut shares: BTreeMap<Field, Vec<(u32, f64)>> =
        Field::ALL.iter().map(|f| (*f, vec![(base.code(*f), 1.0)])).collect();
    shares.insert(Field::Gender, vec![(0, 0.3), (1, 0.7)]);
    shares.insert(Field::AgeBracket, vec![(0, 0.5), (3, 0.25), (5, 0.25)]);
    let pop = Population::new(shares.clone()).unwrap();
    let mut sc = scenario("roast", Season::Winter, 14.0);
    sc.respondents = Respondents::Population(pop);
    let mixed = forecast(&s, &m, &sc).unwrap();
    let mut expect = [0.0; 11];
    for (g, wg) in &shares[&Field::Gender] {
        for (a, wa) in &shares[&Field::AgeBracket] {
            let mut p = base;
            p.set(Field::Gender, *g).unwrap();
            p.set(Field::AgeBracket, *a).unwrap();
            let mut one = sc.clone();
            one.respondents = Respondents::Profile(p);
            let f = forecast(&s, &m, &one).unwrap();
            for j in 0..11 {
                expect[j] += wg * wa * f.probabilities[j];
            }
        }
    }
    for j in 0..11 {
        assert!((mixed.probabilities[j] - expect[j]).abs() < 1e-14);
    }
}

#[test]
fn sweep_picks_the_exhaustive_argmax() {
    let s = small_schema();
    let m = small_model();
    let grid = price_grid(6.0, 24.0, 0.5).unwrap();
    let sc = scenario("ground", Season::Winter, 6.0);
    let sweep = price_sweep(&s, &m, &sc, &grid).unwrap();
    assert_eq!(sweep.points.len(), grid.len());
    assert!(sweep.points.windows(2).all(|w| w[1].expected_quantity <= w[0].expected_quantity));
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in grid.iter().enumerate() {
        let r = forecast(&s, &m, &sc.with_price(&s, *p)).unwrap().expected_revenue;
        if r > best.1 {
            best = (i, r);
        }
    }
    assert_eq!(sweep.best, best.0);
    assert_eq!(sweep.best_price(), grid[best.0]);
    let one = price_sweep(&s, &m, &sc, &[9.0]).unwrap();
    assert_eq!((one.points.len(), one.best), (1, 0));
    assert!(price_sweep(&s, &m, &sc, &[9.0, 8.0]).is_err());
    assert!(price_sweep(&s, &m, &sc, &[]).is_err());
    assert!(price_sweep(&s, &m, &sc, &[-1.0, 2.0]).is_err());
}

#[test]
fn seasonal_deltas_recompute() {
    let s = small_schema();
    let m = small_model();
    let sc = scenario("roast", Season::Winter, 14.0);
    let c = seasonal_compare(&s, &m, &sc).unwrap();
    let w = forecast(&s, &m, &sc).unwrap();
    let su = forecast(&s, &m, &sc.with_season(Season::Summer)).unwrap();
    assert_eq!(c.winter, w);
    assert_eq!(c.summer, su);
    for j in 0..11 {
        assert_eq!(c.probability_delta[j], su.probabilities[j] - w.probabilities[j]);
    }
    assert_eq!(c.zero_purchase_delta, su.zero_purchase - w.zero_purchase);
    assert_eq!(c.expected_quantity_delta, su.expected_quantity - w.expected_quantity);
}

#[test]
fn identical_seasons_give_zero_deltas() {
    let s = small_schema();
    let mut m = small_model();
    let p = &mut m.params;
    for cut in ["ground", "roast"] {
        let w = p.asc[&quantal_market_core::Cell::new(cut, Season::Winter)];
        p.asc.insert(quantal_market_core::Cell::new(cut, Season::Summer), w);
        let t = p.beta[&format!("traceable.yes@{cut}/winter")];
        p.beta.insert(format!("traceable.yes@{cut}/summer"), t);
    }
    p.mu.clear();
    let c = seasonal_compare(&s, &m, &scenario("ground", Season::Summer, 10.0)).unwrap();
    assert!(c.probability_delta.iter().all(|d| *d == 0.0));
    assert_eq!(c.expected_quantity_delta, 0.0);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let s = small_schema();
    let m = small_model();
    assert!(forecast(&s, &m, &scenario("ground", Season::Winter, -1.0)).is_err());
    let mut bad = scenario("ground", Season::Winter, 6.0);
    bad.product.levels.insert("marbling".into(), LevelValue::level("not_marbled"));
    assert!(forecast(&s, &m, &bad).is_err());
    let mut unknown = scenario("ground", Season::Winter, 6.0);
    unknown.product.cut = "brisket".into();
    assert!(forecast(&s, &m, &unknown).is_err());
}

proptest! {
    #[test]
    fn higher_price_never_raises_quantity(p in 1.0f64..40.0, dp in 0.0f64..10.0) {
        let s = small_schema();
        let m = small_model();
        let a = forecast(&s, &m, &scenario("roast", Season::Summer, p)).unwrap();
        let b = forecast(&s, &m, &scenario("roast", Season::Summer, p + dp)).unwrap();
        prop_assert!(b.expected_quantity <= a.expected_quantity + 1e-12);
    }
}
