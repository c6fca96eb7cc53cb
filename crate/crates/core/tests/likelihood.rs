mod common;

use common::*;
use proptest::prelude::*;
use quantal_market_core::likelihood::{category_probabilities, log_likelihood, CompiledModel};
use quantal_market_core::model::ParameterSet;
use quantal_market_core::{Dataset, Model};

/// Direct evaluation: W from the coded row, probabilities as plain CDF differences.
fn oracle_ll(model: &Model, data: &Dataset) -> f64 {
    let schema = small_schema();
    let cols = schema.columns();
    let cdf = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut total = 0.0;
    for o in data.observations() {
        let cell = o.row.cell();
        let mut w = model.params.asc[&cell];
        for (k, c) in cols.iter().enumerate() {
            if let Some(id) = model.spec.param_for(&schema, &c.id, &cell) {
                w += model.params.beta[&id] * o.row.coded[k];
            }
        }
        let z = model.scaling.encode(&data.respondents()[&o.respondent]);
        w += model.params.gamma["gender.female"] * z[7] + model.params.gamma["age"] * z[8];
        let lambda = model.params.mu.get(&cell).copied().unwrap_or(0.0).exp();
        let tau = &model.params.tau[&cell.cut];
        let q = o.quantity as usize;
        let upper = if q == 10 { 1.0 } else { cdf(tau[q] / lambda - w) };
        let lower = if q == 0 { 0.0 } else { cdf(tau[q - 1] / lambda - w) };
        total += (upper - lower).ln();
    }
    total
}

#[test]
fn log_likelihood_matches_direct_oracle() {
    let model = small_model();
    let data = small_data(&model, 120, 3);
    let ll = log_likelihood(&small_schema(), &model.spec, &model.scaling, &model.params, &data).unwrap();
    let oracle = oracle_ll(&model, &data);
    assert!((ll - oracle).abs() < 1e-9 * oracle.abs(), "{ll} vs {oracle}");
    assert!(ll < 0.0);
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let model = small_model();
    let data = small_data(&model, 80, 4);
    let mut cm = CompiledModel::new(&small_schema(), &model.spec, &model.scaling, &data).unwrap();
    cm.set_fixed_scales(&model.params);
    let theta = cm.theta_from_params(&model.params, None).unwrap();
    let mut g = vec![0.0; cm.dim()];
    cm.log_likelihood_grad(&theta, &mut g);
    let mut scratch = vec![0.0; cm.dim()];
    for i in 0..cm.dim() {
        let h = 1e-6;
        let mut tp = theta.clone();
        tp[i] += h;
        let mut tm = theta.clone();
        tm[i] -= h;
        let fd = (cm.log_likelihood_grad(&tp, &mut scratch) - cm.log_likelihood_grad(&tm, &mut scratch)) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-4 * (1.0 + g[i].abs()), "{}: {fd} vs {}", cm.name(i), g[i]);
    }
    // free scales exist only for winter cells with a summer reference
    let names: Vec<&String> = cm.names().iter().filter(|n| n.starts_with("mu@")).collect();
    assert_eq!(names, vec!["mu@ground/winter", "mu@roast/winter"]);
}

#[test]
fn theta_round_trips_through_parameter_sets() {
    let model = small_model();
    let data = small_data(&model, 40, 5);
    let mut cm = CompiledModel::new(&small_schema(), &model.spec, &model.scaling, &data).unwrap();
    cm.set_fixed_scales(&model.params);
    let theta = cm.theta_from_params(&model.params, None).unwrap();
    let back: ParameterSet = cm.params_from_theta(&theta);
    for (k, v) in model.params.flat() {
        let got = back.flat()[&k];
        assert!((got - v).abs() < 1e-12, "{k}");
    }
}

#[test]
fn permutation_and_duplication() {
    let schema = small_schema();
    let model = small_model();
    let data = small_data(&model, 60, 6);
    let ll = log_likelihood(&schema, &model.spec, &model.scaling, &model.params, &data).unwrap();

    let mut obs = data.observations().to_vec();
    obs.reverse();
    obs.rotate_left(17);
    let shuffled = Dataset::new(&schema, obs, data.respondents().clone()).unwrap();
    let ll2 = log_likelihood(&schema, &model.spec, &model.scaling, &model.params, &shuffled).unwrap();
    assert!((ll - ll2).abs() < 1e-9 * ll.abs());

    let doubled = Dataset::merge(&data, &data.with_respondent_offset(1000).unwrap()).unwrap();
    let ll3 = log_likelihood(&schema, &model.spec, &model.scaling, &model.params, &doubled).unwrap();
    assert!((ll3 - 2.0 * ll).abs() < 1e-9 * ll.abs());
}

#[test]
fn infeasible_thresholds_are_rejected() {
    let schema = small_schema();
    let mut model = small_model();
    let data = small_data(&model, 10, 8);
    model.params.tau.get_mut("ground").unwrap()[4] = 1.0;
    let err = log_likelihood(&schema, &model.spec, &model.scaling, &model.params, &data).unwrap_err();
    assert!(matches!(err, quantal_market_core::Error::Infeasible(_)), "{err}");
}

#[test]
fn zero_index_gives_the_intercept_only_distribution() {
    let p = category_probabilities(0.278, &GROUND_TAU, 1.0);
    let cdf = |x: f64| 1.0 / (1.0 + (-x).exp());
    assert!((p[0] - cdf(-0.278)).abs() < 1e-15);
    assert!((category_probabilities(0.0, &GROUND_TAU, 1.0)[0] - 0.5).abs() < 1e-15);
}

fn tau_strategy() -> impl Strategy<Value = [f64; 10]> {
    proptest::collection::vec(0.01f64..2.0, 9).prop_map(|inc| {
        let mut t = [0.0; 10];
        for j in 1..10 {
            t[j] = t[j - 1] + inc[j - 1];
        }
        t
    })
}

proptest! {
    #[test]
    fn probabilities_form_a_distribution(w in -15.0f64..15.0, tau in tau_strategy(), mu in -1.0f64..1.0) {
        let p = category_probabilities(w, &tau, mu.exp());
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn higher_index_shifts_mass_upwards(w in -8.0f64..8.0, dw in 0.01f64..3.0, tau in tau_strategy()) {
        let lo = category_probabilities(w, &tau, 1.0);
        let hi = category_probabilities(w + dw, &tau, 1.0);
        let (mut cl, mut ch) = (0.0, 0.0);
        for j in 0..10 {
            cl += lo[j];
            ch += hi[j];
            prop_assert!(ch <= cl + 1e-12, "cumulative at {}: {} > {}", j, ch, cl);
        }
    }

    #[test]
    fn zero_purchase_does_not_depend_on_scale(w in -8.0f64..8.0, tau in tau_strategy(), a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let p = category_probabilities(w, &tau, a.exp());
        let q = category_probabilities(w, &tau, b.exp());
        prop_assert!((p[0] - q[0]).abs() < 1e-15);
    }
}
