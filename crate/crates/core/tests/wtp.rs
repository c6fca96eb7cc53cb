mod common;

use common::*;
use proptest::prelude::*;
use quantal_market_core::schema::{Cell, Season};
use quantal_market_core::wtp::{level_contribution, wtp, wtp_table, PER_UNIT};
use quantal_market_core::Error;

fn cell(cut: &str, season: Season) -> Cell {
    Cell::new(cut, season)
}

#[test]
fn ratio_of_contribution_to_price() {
    let s = small_schema();
    let m = small_model();
    let c = cell("ground", Season::Winter);
    assert_eq!(wtp(&s, &m, &c, "traceable", "yes").unwrap(), -0.2 / -0.06);
    assert_eq!(wtp(&s, &m, &c, "use_by", PER_UNIT).unwrap(), -0.04 / -0.06);
    // base level carries minus the sum of the other levels
    let fresh = wtp(&s, &m, &c, "packaging", "fresh").unwrap();
    assert!((fresh - (-(-(0.25 - 0.15)) / -0.06)).abs() < 1e-15);
}

#[test]
fn two_level_attributes_are_antisymmetric() {
    let s = small_schema();
    let m = small_model();
    for c in s.cells() {
        let yes = wtp(&s, &m, &c, "traceable", "yes").unwrap();
        let no = wtp(&s, &m, &c, "traceable", "no").unwrap();
        assert_eq!(yes, -no);
    }
    let r = cell("roast", Season::Summer);
    assert_eq!(wtp(&s, &m, &r, "marbling", "not_marbled").unwrap(), -wtp(&s, &m, &r, "marbling", "somewhat_marbled").unwrap());
}

#[test]
fn excluded_attribute_is_zero() {
    let s = small_schema();
    let m = small_model();
    let g = cell("ground", Season::Summer);
    assert_eq!(level_contribution(&s, &m, &g, "marbling", "not_marbled").unwrap(), None);
    assert_eq!(wtp(&s, &m, &g, "marbling", "not_marbled").unwrap(), 0.0);
    let t = wtp_table(&s, &m).unwrap();
    assert_eq!(t.get(&g, "marbling", "somewhat_marbled").unwrap().value, None);
    assert!(t.for_cell(&g).filter(|e| e.attribute != "marbling" && e.attribute != "weight").all(|e| e.value.is_some()));
    assert!(t.entries.iter().all(|e| e.attribute != "price"));
}

#[test]
fn equal_coefficients_give_minus_one() {
    let s = small_schema();
    let mut m = small_model();
    m.params.beta.insert("use_by".into(), -0.06);
    assert_eq!(wtp(&s, &m, &cell("ground", Season::Winter), "use_by", PER_UNIT).unwrap(), -1.0);
}

#[test]
fn zero_coefficients_give_zero_table() {
    let s = small_schema();
    let mut m = small_model();
    for (id, b) in m.params.beta.iter_mut() {
        if !id.starts_with("price") {
            *b = 0.0;
        }
    }
    let t = wtp_table(&s, &m).unwrap();
    assert!(t.entries.iter().all(|e| e.value.unwrap_or(0.0) == 0.0));
}

#[test]
fn price_coefficient_must_be_negative() {
    let s = small_schema();
    let mut m = small_model();
    m.params.beta.insert("price@roast".into(), 0.01);
    let e = wtp(&s, &m, &cell("roast", Season::Winter), "traceable", "yes").unwrap_err();
    assert!(matches!(e, Error::Infeasible(_)));
    assert!(wtp(&s, &m, &cell("ground", Season::Winter), "traceable", "yes").is_ok());
    assert!(matches!(wtp(&s, &m, &cell("ground", Season::Winter), "traceable", "maybe"), Err(Error::UnknownLevel { .. })));
}

proptest! {
    #[test]
    fn scale_invariance(c in 0.01f64..100.0) {
        let s = small_schema();
        let m = small_model();
        let mut scaled = m.clone();
        for b in scaled.params.beta.values_mut() {
            *b *= c;
        }
        let a = wtp_table(&s, &m).unwrap();
        let b = wtp_table(&s, &scaled).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            match (x.value, y.value) {
                (Some(u), Some(v)) => prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs())),
                (u, v) => prop_assert_eq!(u, v),
            }
        }
    }
}
