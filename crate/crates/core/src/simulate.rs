//! Purchase-quantity forecasts for product scenarios.

use alloc::format;
use alloc::vec::Vec;

use crate::covariates::{Population, RespondentProfile};
use crate::dataset::CATEGORIES;
use crate::error::{Error, Result};
use crate::likelihood::category_probabilities;
use crate::model::Model;
use crate::schema::{AttributeSchema, Cell, DesignRow, LevelValue, Product, Season};

/// Who the forecast is for.
#[derive(Debug, Clone, PartialEq)]
pub enum Respondents {
    Profile(RespondentProfile),
    /// Probability-weighted average over the population's profiles.
    Population(Population),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub season: Season,
    /// Cut and attribute levels, including price and weight.
    pub product: Product,
    pub respondents: Respondents,
    /// Multiplier turning price × quantity into revenue; one by default.
    pub weight_factor: f64,
}

impl Scenario {
    pub fn cell(&self) -> Cell {
        Cell::new(self.product.cut.clone(), self.season)
    }

    pub fn price(&self, schema: &AttributeSchema) -> Result<f64> {
        match self.product.levels.get(&schema.price) {
            Some(LevelValue::Value(p)) if *p > 0.0 => Ok(*p),
            _ => Err(Error::Data("scenario price must be a positive number".into())),
        }
    }

    pub fn with_price(&self, schema: &AttributeSchema, price: f64) -> Scenario {
        let mut s = self.clone();
        s.product.levels.insert(schema.price.clone(), LevelValue::Value(price));
        s
    }

    pub fn with_season(&self, season: Season) -> Scenario {
        Scenario { season, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurchaseForecast {
    pub price: f64,
    pub probabilities: [f64; CATEGORIES],
    pub expected_quantity: f64,
    pub zero_purchase: f64,
    pub expected_revenue: f64,
}

/// Product part of the latent index: intercept plus coded attributes.
pub fn systematic_utility(schema: &AttributeSchema, model: &Model, row: &DesignRow) -> Result<f64> {
    let cell = row.cell();
    let mut w = *model
        .params
        .asc
        .get(&cell)
        .ok_or_else(|| Error::Spec(format!("model does not cover {cell}")))?;
    for (k, col) in schema.columns().iter().enumerate() {
        if let Some(id) = model.spec.param_for(schema, &col.id, &cell) {
            let b = model.params.beta.get(&id).ok_or_else(|| Error::Spec(format!("model lacks coefficient `{id}`")))?;
            w += b * row.coded[k];
        }
    }
    Ok(w)
}

fn summarize(price: f64, weight_factor: f64, probabilities: [f64; CATEGORIES]) -> PurchaseForecast {
    let expected_quantity: f64 = probabilities.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    PurchaseForecast {
        price,
        probabilities,
        expected_quantity,
        zero_purchase: probabilities[0],
        expected_revenue: price * expected_quantity * weight_factor,
    }
}

pub fn forecast(schema: &AttributeSchema, model: &Model, scenario: &Scenario) -> Result<PurchaseForecast> {
    let cell = scenario.cell();
    let price = scenario.price(schema)?;
    if !(scenario.weight_factor > 0.0) || !scenario.weight_factor.is_finite() {
        return Err(Error::Data("weight factor must be positive".into()));
    }
    let row = schema.build_row(&scenario.product, scenario.season)?;
    let w0 = systematic_utility(schema, model, &row)?;
    let tau = model.thresholds(&cell).ok_or_else(|| Error::Spec(format!("model has no thresholds for {cell}")))?;
    model.params.check_thresholds()?;
    let lambda = model.params.lambda(&cell);
    for g in &model.spec.covariates {
        if !model.params.gamma.contains_key(g) {
            return Err(Error::Spec(format!("model lacks covariate coefficient `{g}`")));
        }
    }
    let probabilities = match &scenario.respondents {
        Respondents::Profile(p) => {
            p.validate()?;
            let u = model.scaling.utility(&model.params.gamma, p);
            category_probabilities(w0 + u, tau, lambda)
        }
        Respondents::Population(pop) => {
            let lists = pop.contributions(&model.scaling, &model.params.gamma);
            mixture(&lists, |u| category_probabilities(w0 + u, tau, lambda))
        }
    };
    Ok(summarize(price, scenario.weight_factor, probabilities))
}

/// Weighted sum of `f` over every combination of one entry per list.
fn mixture(lists: &[Vec<(f64, f64)>], f: impl Fn(f64) -> [f64; CATEGORIES]) -> [f64; CATEGORIES] {
    let mut out = [0.0; CATEGORIES];
    let mut idx = alloc::vec![0usize; lists.len()];
    loop {
        let mut w = 1.0;
        let mut u = 0.0;
        for (l, i) in lists.iter().zip(&idx) {
            w *= l[*i].0;
            u += l[*i].1;
        }
        let p = f(u);
        for j in 0..CATEGORIES {
            out[j] += w * p[j];
        }
        let mut k = 0;
        loop {
            if k == lists.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSweep {
    pub points: Vec<PurchaseForecast>,
    /// Index into `points` of the revenue-maximizing price (first on ties).
    pub best: usize,
}

impl PriceSweep {
    pub fn best_price(&self) -> f64 {
        self.points[self.best].price
    }
}

pub fn price_sweep(schema: &AttributeSchema, model: &Model, scenario: &Scenario, grid: &[f64]) -> Result<PriceSweep> {
    if grid.is_empty() {
        return Err(Error::Data("price grid is empty".into()));
    }
    if grid.iter().any(|p| !(*p > 0.0) || !p.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Data("price grid must be positive and strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for p in grid {
        points.push(forecast(schema, model, &scenario.with_price(schema, *p))?);
    }
    let mut best = 0;
    for (i, f) in points.iter().enumerate() {
        if f.expected_revenue > points[best].expected_revenue {
            best = i;
        }
    }
    Ok(PriceSweep { points, best })
}

/// `lo, lo + step, …` up to `hi` inclusive.
pub fn price_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && step > 0.0) || !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(Error::Data(format!("invalid price grid {lo}:{hi}:{step}")));
    }
    let n = libm::floor((hi - lo) / step + 1e-9) as usize;
    if n > 100_000 {
        return Err(Error::Data("price grid is too fine".into()));
    }
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalComparison {
    pub winter: PurchaseForecast,
    pub summer: PurchaseForecast,
    /// Summer minus winter, per quantity.
    pub probability_delta: [f64; CATEGORIES],
    pub expected_quantity_delta: f64,
    pub zero_purchase_delta: f64,
}

pub fn seasonal_compare(schema: &AttributeSchema, model: &Model, scenario: &Scenario) -> Result<SeasonalComparison> {
    let winter = forecast(schema, model, &scenario.with_season(Season::Winter))?;
    let summer = forecast(schema, model, &scenario.with_season(Season::Summer))?;
    let mut probability_delta = [0.0; CATEGORIES];
    for j in 0..CATEGORIES {
        probability_delta[j] = summer.probabilities[j] - winter.probabilities[j];
    }
    Ok(SeasonalComparison {
        probability_delta,
        expected_quantity_delta: summer.expected_quantity - winter.expected_quantity,
        zero_purchase_delta: summer.zero_purchase - winter.zero_purchase,
        winter,
        summer,
    })
}
