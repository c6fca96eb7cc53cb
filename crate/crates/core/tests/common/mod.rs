#![allow(dead_code)]

use std::collections::BTreeMap;

use quantal_market_core::covariates::{Field, Population};
use quantal_market_core::design::{self, Design, DesignOptions, ImproveOptions};
use quantal_market_core::model::{BindingKind, BindingRule, Model, ModelSpec, ParameterSet, ScaleLayout, ThresholdLayout};
use quantal_market_core::schema::{AttributeDef, AttributeKind, AttributeSchema, Cell, ContinuousLevels, Season};
use quantal_market_core::synth::{synthesize, SeasonAssignment, SynthOptions};
use quantal_market_core::{CovariateCoder, Dataset};

pub fn effects(name: &str, levels: &[&str], base: &str) -> AttributeDef {
    AttributeDef {
        name: name.into(),
        kind: if levels.len() == 2 && levels.contains(&"yes") { AttributeKind::Binary } else { AttributeKind::Effects },
        levels: levels.iter().map(|s| s.to_string()).collect(),
        base: Some(base.into()),
        excluded_cuts: vec![],
        unit: None,
        values: vec![],
        per_cut: BTreeMap::new(),
    }
}

pub fn continuous(name: &str, values: &[f64]) -> AttributeDef {
    AttributeDef {
        name: name.into(),
        kind: AttributeKind::Continuous,
        levels: vec![],
        base: None,
        excluded_cuts: vec![],
        unit: Some("unit".into()),
        values: values.to_vec(),
        per_cut: BTreeMap::new(),
    }
}

pub fn per_cut(name: &str, unit: &str, values: &[(&str, &[f64])]) -> AttributeDef {
    let mut a = continuous(name, &[]);
    a.unit = None;
    a.per_cut = values
        .iter()
        .map(|(c, v)| (c.to_string(), ContinuousLevels { unit: unit.into(), values: v.to_vec() }))
        .collect();
    a
}

/// Two cuts, one three-level attribute, one claim excluded for ground, use-by, weight and price.
pub fn small_schema() -> AttributeSchema {
    let mut marbling = effects("marbling", &["not_marbled", "somewhat_marbled"], "somewhat_marbled");
    marbling.excluded_cuts = vec!["ground".into()];
    let s = AttributeSchema {
        cuts: vec!["ground".into(), "roast".into()],
        price: "price".into(),
        weight: "weight".into(),
        attributes: vec![
            effects("packaging", &["vacuum", "tray", "fresh"], "fresh"),
            marbling,
            effects("traceable", &["yes", "no"], "no"),
            continuous("use_by", &[1.0, 3.0, 7.0, 14.0]),
            per_cut("weight", "oz", &[("ground", &[12.0, 16.0]), ("roast", &[48.0, 80.0])]),
            per_cut("price", "usd_per_lb", &[("ground", &[6.0, 12.0, 18.0, 24.0]), ("roast", &[8.0, 14.0, 20.0, 26.0])]),
        ],
    };
    s.validate().unwrap();
    s
}

pub fn small_spec() -> ModelSpec {
    let mut spec = ModelSpec::new(ThresholdLayout::PerCut, ScaleLayout::WinterRelative);
    spec.bindings = vec![
        BindingRule::new("packaging.vacuum", BindingKind::Generic, &["*"]),
        BindingRule::new("packaging.tray", BindingKind::Generic, &["*"]),
        BindingRule::new("marbling.not_marbled", BindingKind::Cut, &["*"]),
        BindingRule::new("traceable.yes", BindingKind::CutSeason, &["*"]),
        BindingRule::new("use_by", BindingKind::Generic, &["*"]),
        BindingRule::new("price", BindingKind::Cut, &["*"]),
    ];
    spec.covariates = vec!["gender.female".into(), "age".into()];
    spec
}

pub const GROUND_TAU: [f64; 10] = [0.0, 1.57, 2.74, 3.61, 4.56, 5.28, 5.78, 6.35, 6.76, 7.46];
pub const ROAST_TAU: [f64; 10] = [0.0, 1.61, 3.09, 4.01, 4.92, 5.99, 6.32, 6.8, 7.21, 7.9];

pub fn small_truth() -> ParameterSet {
    let mut p = ParameterSet::default();
    for (cut, w, s) in [("ground", 1.2, 0.9), ("roast", 0.8, 1.1)] {
        p.asc.insert(Cell::new(cut, Season::Winter), w);
        p.asc.insert(Cell::new(cut, Season::Summer), s);
    }
    p.beta.insert("packaging.vacuum".into(), 0.25);
    p.beta.insert("packaging.tray".into(), -0.15);
    p.beta.insert("marbling.not_marbled@roast".into(), -0.3);
    p.beta.insert("traceable.yes@ground/winter".into(), 0.2);
    p.beta.insert("traceable.yes@ground/summer".into(), 0.1);
    p.beta.insert("traceable.yes@roast/winter".into(), 0.3);
    p.beta.insert("traceable.yes@roast/summer".into(), 0.25);
    p.beta.insert("use_by".into(), 0.04);
    p.beta.insert("price@ground".into(), -0.06);
    p.beta.insert("price@roast".into(), -0.05);
    p.gamma.insert("gender.female".into(), 0.15);
    p.gamma.insert("age".into(), -0.2);
    p.tau.insert("ground".into(), GROUND_TAU.to_vec());
    p.tau.insert("roast".into(), ROAST_TAU.to_vec());
    p.mu.insert(Cell::new("ground", Season::Winter), libm_ln(1.3));
    p.mu.insert(Cell::new("roast", Season::Winter), libm_ln(0.8));
    p
}

fn libm_ln(x: f64) -> f64 {
    x.ln()
}

pub fn population() -> Population {
    let mut shares = BTreeMap::new();
    let even = |n: u32| (0..n).map(|c| (c, 1.0 / n as f64)).collect::<Vec<_>>();
    shares.insert(Field::Education, even(4));
    shares.insert(Field::Dwelling, even(2));
    shares.insert(Field::HouseholdSize, vec![(1, 0.2), (2, 0.3), (3, 0.3), (4, 0.2)]);
    shares.insert(Field::IncomeBracket, even(6));
    shares.insert(Field::State, even(2));
    shares.insert(Field::PurchaseFrequency, even(4));
    shares.insert(Field::Gender, even(2));
    shares.insert(Field::AgeBracket, even(6));
    shares.insert(Field::HouseholdType, even(5));
    Population::new(shares).unwrap()
}

pub fn small_model() -> Model {
    Model { spec: small_spec(), scaling: CovariateCoder::fit_population(&population()), params: small_truth() }
}

pub fn small_design(seed: u64) -> Design {
    let schema = small_schema();
    let d = design::generate(&schema, &DesignOptions { tasks: 40, alternatives: 4, blocks: 10, seed }).unwrap();
    design::improve(&schema, &d, &ImproveOptions { max_iters: 5000, ..Default::default() }).unwrap()
}

pub fn small_data(model: &Model, respondents: usize, seed: u64) -> Dataset {
    let schema = small_schema();
    let design = small_design(7);
    synthesize(
        &schema,
        model,
        &design,
        &population(),
        &SynthOptions { respondents, seed, seasons: SeasonAssignment::Alternate, first_id: 1 },
    )
    .unwrap()
}
