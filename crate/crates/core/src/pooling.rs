//! Likelihood-ratio test of pooling two seasonal samples, and the data behind a
//! seasonal preference-regularity plot.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{fit, EstimationResult, FitOptions};
use crate::model::{Model, ModelSpec};
use crate::schema::{AttributeSchema, Cell, Season};
use crate::stats::chi2_sf;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingReport {
    pub ll_winter: f64,
    pub ll_summer: f64,
    pub ll_pooled: f64,
    pub k_winter: usize,
    pub k_summer: usize,
    pub k_pooled: usize,
    /// `−2 [LL_pooled − (LL_winter + LL_summer)]`.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub level: f64,
    /// True when pooling is rejected at `level`.
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingFits {
    pub winter: EstimationResult,
    pub summer: EstimationResult,
    pub pooled: EstimationResult,
}

/// Fits each sample separately and both together under `spec`, and tests the
/// restriction at significance `level`. The second sample's respondent ids are
/// shifted so the merged sample stays well formed.
pub fn pooling_test(
    schema: &AttributeSchema,
    winter: &Dataset,
    summer: &Dataset,
    spec: &ModelSpec,
    level: f64,
    opts: &FitOptions,
) -> Result<(PoolingReport, PoolingFits)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Spec("significance level must lie in (0, 1)".into()));
    }
    let shifted = summer.with_respondent_offset(winter.max_respondent() + 1)?;
    let pooled_data = Dataset::merge(winter, &shifted)?;
    let mut o = opts.clone();
    if o.coder.is_none() {
        o.coder = Some(crate::covariates::CovariateCoder::fit(pooled_data.respondents().values())?);
    }
    let w = fit(schema, winter, spec, &o)?;
    let s = fit(schema, summer, spec, &o)?;
    let p = fit(schema, &pooled_data, spec, &o)?;
    let statistic = -2.0 * (p.log_likelihood - (w.log_likelihood + s.log_likelihood));
    let df = (w.n_params + s.n_params)
        .checked_sub(p.n_params)
        .ok_or_else(|| Error::Spec("pooled model has more parameters than the separate models".into()))?;
    let p_value = if df == 0 { 1.0 } else { chi2_sf(f64::max(statistic, 0.0), df as f64) };
    let report = PoolingReport {
        ll_winter: w.log_likelihood,
        ll_summer: s.log_likelihood,
        ll_pooled: p.log_likelihood,
        k_winter: w.n_params,
        k_summer: s.n_params,
        k_pooled: p.n_params,
        statistic,
        df,
        p_value,
        level,
        reject: p_value < level,
    };
    Ok((report, PoolingFits { winter: w, summer: s, pooled: p }))
}

/// One point of the seasonal regularity plot.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePoint {
    pub column: String,
    pub cut: String,
    pub winter: f64,
    pub summer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePlot {
    pub points: Vec<PreferencePoint>,
    /// Least-squares slope of summer on winter through the origin.
    pub slope: f64,
}

/// Pairs the winter and summer coefficient of every (column, cut) that both
/// models estimate.
pub fn preference_plot_data(schema: &AttributeSchema, winter: &Model, summer: &Model) -> Result<PreferencePlot> {
    let mut points = Vec::new();
    for cut in &schema.cuts {
        let (cw, cs) = (Cell::new(cut.clone(), Season::Winter), Cell::new(cut.clone(), Season::Summer));
        for col in schema.columns() {
            if let (Some(w), Some(s)) =
                (winter.coefficient(schema, &col.id, &cw), summer.coefficient(schema, &col.id, &cs))
            {
                points.push(PreferencePoint { column: col.id.clone(), cut: cut.clone(), winter: w, summer: s });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Data("the two models share no coefficient".into()));
    }
    let sxy: f64 = points.iter().map(|p| p.winter * p.summer).sum();
    let sxx: f64 = points.iter().map(|p| p.winter * p.winter).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    Ok(PreferencePlot { points, slope })
}

/// Points keyed by `column@cut`, for lookups.
pub fn index_points(plot: &PreferencePlot) -> BTreeMap<String, (f64, f64)> {
    plot.points.iter().map(|p| (alloc::format!("{}@{}", p.column, p.cut), (p.winter, p.summer))).collect()
}
