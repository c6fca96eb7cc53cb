//! Scenario requests shared by the command line and the HTTP service, so both
//! produce the same numbers from the same input.

use std::collections::BTreeMap;

use quantal_market_core::covariates::{Field, Population};
use quantal_market_core::schema::{AttributeSchema, LevelValue, Product, Season};
use quantal_market_core::simulate::{self, PurchaseForecast, Respondents, Scenario};
use quantal_market_core::{Error, Model, RespondentProfile};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

fn one() -> f64 {
    1.0
}

/// A scenario as written in a scenario file or request body: reserved keys plus
/// one key per attribute of the product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    pub cut: String,
    /// Forecast one season; both seasons when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<Season>,
    #[serde(default = "one")]
    pub weight_factor: f64,
    /// Forecast both seasons even when `season` is given.
    #[serde(default)]
    pub both_seasons: bool,
    /// Price grid `lo:hi:step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    /// Explicit ascending price grid; takes precedence over `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    /// Single respondent, with unlisted fields at their defaults; the population when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<BTreeMap<String, LevelValue>>,
    #[serde(flatten)]
    pub levels: BTreeMap<String, LevelValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub price: f64,
    pub probabilities: Vec<f64>,
    pub expected_quantity: f64,
    pub zero_purchase: f64,
    pub expected_revenue: f64,
}

impl From<&PurchaseForecast> for ForecastRecord {
    fn from(f: &PurchaseForecast) -> Self {
        ForecastRecord {
            price: f.price,
            probabilities: f.probabilities.to_vec(),
            expected_quantity: f.expected_quantity,
            zero_purchase: f.zero_purchase,
            expected_revenue: f.expected_revenue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonResult {
    pub season: Season,
    /// One forecast per price, ascending.
    pub points: Vec<ForecastRecord>,
    /// Index of the revenue-maximizing point.
    pub best_index: usize,
    pub best_price: f64,
}

/// Summer minus winter at a single price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonDeltas {
    pub probability_delta: Vec<f64>,
    pub expected_quantity_delta: f64,
    pub zero_purchase_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub cut: String,
    pub results: Vec<SeasonResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<SeasonDeltas>,
}

pub fn parse_sweep(s: &str) -> AppResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || AppError::Core(Error::Data(format!("sweep `{s}` is not of the form lo:hi:step")));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<AppResult<_>>()?;
    Ok(simulate::price_grid(v[0], v[1], v[2])?)
}

fn profile(fields: &BTreeMap<String, LevelValue>) -> AppResult<RespondentProfile> {
    let mut p = RespondentProfile::default();
    for (k, v) in fields {
        let f: Field = k.parse()?;
        let code = match v {
            LevelValue::Level(s) => f.parse_code(s)?,
            LevelValue::Value(x) if x.fract() == 0.0 && *x >= 0.0 && *x <= u32::MAX as f64 => *x as u32,
            LevelValue::Value(x) => return Err(Error::Data(format!("invalid value {x} for {f}")).into()),
        };
        p.set(f, code)?;
    }
    p.validate()?;
    Ok(p)
}

impl ScenarioRequest {
    pub fn scenario(&self, schema: &AttributeSchema, population: &Population) -> AppResult<Scenario> {
        schema.check_cut(&self.cut)?;
        let respondents = match &self.profile {
            Some(f) => Respondents::Profile(profile(f)?),
            None => Respondents::Population(population.clone()),
        };
        Ok(Scenario {
            season: self.season.unwrap_or(Season::Winter),
            product: Product { cut: self.cut.clone(), levels: self.levels.clone() },
            respondents,
            weight_factor: self.weight_factor,
        })
    }

    pub fn seasons(&self) -> Vec<Season> {
        match self.season {
            Some(s) if !self.both_seasons => vec![s],
            _ => Season::ALL.to_vec(),
        }
    }

    /// The price grid, or `None` for a forecast at the scenario's own price.
    pub fn grid(&self) -> AppResult<Option<Vec<f64>>> {
        match (&self.prices, &self.sweep) {
            (Some(p), _) => Ok(Some(p.clone())),
            (None, Some(s)) => Ok(Some(parse_sweep(s)?)),
            (None, None) => Ok(None),
        }
    }
}

/// Runs a scenario request: a forecast or price sweep per season, plus the
/// seasonal deltas when both seasons are forecast at one price.
pub fn run(schema: &AttributeSchema, model: &Model, population: &Population, req: &ScenarioRequest) -> AppResult<SimulationOutput> {
    let base = req.scenario(schema, population)?;
    let seasons = req.seasons();
    let grid = req.grid()?;
    let mut results = Vec::new();
    let mut comparison = None;
    match grid {
        Some(grid) => {
            for s in seasons {
                let sweep = simulate::price_sweep(schema, model, &base.with_season(s), &grid)?;
                results.push(SeasonResult {
                    season: s,
                    points: sweep.points.iter().map(ForecastRecord::from).collect(),
                    best_index: sweep.best,
                    best_price: sweep.best_price(),
                });
            }
        }
        None if seasons.len() == 2 => {
            let c = simulate::seasonal_compare(schema, model, &base)?;
            for (s, f) in [(Season::Winter, &c.winter), (Season::Summer, &c.summer)] {
                results.push(SeasonResult { season: s, points: vec![f.into()], best_index: 0, best_price: f.price });
            }
            comparison = Some(SeasonDeltas {
                probability_delta: c.probability_delta.to_vec(),
                expected_quantity_delta: c.expected_quantity_delta,
                zero_purchase_delta: c.zero_purchase_delta,
            });
        }
        None => {
            for s in seasons {
                let f = simulate::forecast(schema, model, &base.with_season(s))?;
                results.push(SeasonResult { season: s, points: vec![(&f).into()], best_index: 0, best_price: f.price });
            }
        }
    }
    Ok(SimulationOutput { cut: req.cut.clone(), results, comparison })
}

/// Header of the forecast CSV.
pub fn csv_header() -> Vec<String> {
    let mut h = vec!["season".to_string(), "price".to_string()];
    h.extend((0..quantal_market_core::CATEGORIES).map(|j| format!("p{j}")));
    h.extend(["expected_quantity", "zero_purchase", "expected_revenue", "best"].map(String::from));
    h
}

/// One CSV row per forecast point, then a `delta` row for a seasonal comparison.
pub fn csv_rows(out: &SimulationOutput) -> Vec<Vec<String>> {
    let n = crate::io::num;
    let mut rows = Vec::new();
    for r in &out.results {
        for (i, p) in r.points.iter().enumerate() {
            let mut row = vec![r.season.to_string(), n(p.price)];
            row.extend(p.probabilities.iter().map(|x| n(*x)));
            row.extend([n(p.expected_quantity), n(p.zero_purchase), n(p.expected_revenue)]);
            row.push(u8::from(i == r.best_index).to_string());
            rows.push(row);
        }
    }
    if let Some(c) = &out.comparison {
        let mut row = vec!["delta".to_string(), n(out.results[0].points[0].price)];
        row.extend(c.probability_delta.iter().map(|x| n(*x)));
        row.extend([n(c.expected_quantity_delta), n(c.zero_purchase_delta), String::new(), String::new()]);
        rows.push(row);
    }
    rows
}
