//! Willingness to pay as the ratio of an attribute's utility contribution to the
//! price coefficient.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::schema::{AttributeSchema, Cell};

/// Label used for the per-unit entry of a continuous attribute.
pub const PER_UNIT: &str = "per_unit";

/// Utility contribution of an attribute level in a cell: the level's
/// coefficient, minus the sum of the attribute's coefficients for the base
/// level, or the per-unit coefficient of a continuous attribute. `None` when the
/// attribute has no coefficient in the cell.
pub fn level_contribution(
    schema: &AttributeSchema,
    model: &Model,
    cell: &Cell,
    attribute: &str,
    level: &str,
) -> Result<Option<f64>> {
    let a = schema.attribute(attribute).ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    schema.check_cut(&cell.cut)?;
    if !a.is_categorical() {
        if level != PER_UNIT {
            return Err(Error::UnknownLevel { attribute: attribute.to_string(), level: level.to_string() });
        }
        return Ok(model.coefficient(schema, &a.name, cell));
    }
    if !a.levels.iter().any(|l| l == level) {
        return Err(Error::UnknownLevel { attribute: attribute.to_string(), level: level.to_string() });
    }
    let coefs: Vec<Option<f64>> = a.column_ids().iter().map(|c| model.coefficient(schema, c, cell)).collect();
    if Some(level) == a.base_level() {
        if coefs.iter().all(Option::is_none) {
            return Ok(None);
        }
        return Ok(Some(-coefs.iter().flatten().sum::<f64>()));
    }
    let k = a.coded_levels().position(|l| l == level).expect("non-base level");
    Ok(coefs[k])
}

/// Price coefficient of a cell; must be negative.
pub fn price_coefficient(schema: &AttributeSchema, model: &Model, cell: &Cell) -> Result<f64> {
    let p = model
        .coefficient(schema, &schema.price, cell)
        .ok_or_else(|| Error::Infeasible(format!("no price coefficient for {cell}")))?;
    if !(p < 0.0) {
        return Err(Error::Infeasible(format!("price coefficient for {cell} is {p}, not negative")));
    }
    Ok(p)
}

/// `−contribution / β_price`, zero for an excluded attribute.
pub fn wtp(schema: &AttributeSchema, model: &Model, cell: &Cell, attribute: &str, level: &str) -> Result<f64> {
    let price = price_coefficient(schema, model, cell)?;
    Ok(match level_contribution(schema, model, cell, attribute, level)? {
        Some(b) => -b / price,
        None => 0.0,
    })
}

/// Range of `b / p` over `b ∈ [beta ± beta_half]`, `p ∈ [price ± price_half]`,
/// with `p` the price coefficient's magnitude.
pub fn ratio_interval(beta: f64, beta_half: f64, price: f64, price_half: f64) -> Result<(f64, f64)> {
    let p = libm::fabs(price);
    let (plo, phi) = (p - price_half, p + price_half);
    if !(plo > 0.0) {
        return Err(Error::Infeasible(format!("price interval [{plo}, {phi}] contains zero")));
    }
    let corners = [(beta - beta_half) / plo, (beta - beta_half) / phi, (beta + beta_half) / plo, (beta + beta_half) / phi];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Whether a reported WTP is attainable from some unrounded coefficients that
/// round to `beta` and `price` at `decimals` places. `price` may be given by
/// magnitude or sign.
pub fn interval_consistency(beta: f64, price: f64, reported: f64, decimals: u32) -> Result<bool> {
    if decimals < 1 {
        return Err(Error::Spec("decimals must be at least 1".into()));
    }
    let h = 0.5 * libm::pow(10.0, -(decimals as f64));
    let (lo, hi) = ratio_interval(beta, h, price, h)?;
    Ok(lo <= reported && reported <= hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtpEntry {
    pub cell: Cell,
    pub attribute: String,
    /// Level name, or [`PER_UNIT`] for continuous attributes.
    pub level: String,
    /// `None` when the attribute has no coefficient in the cell.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtpTable {
    pub entries: Vec<WtpEntry>,
}

impl WtpTable {
    pub fn get(&self, cell: &Cell, attribute: &str, level: &str) -> Option<&WtpEntry> {
        self.entries.iter().find(|e| &e.cell == cell && e.attribute == attribute && e.level == level)
    }

    pub fn for_cell<'a>(&'a self, cell: &'a Cell) -> impl Iterator<Item = &'a WtpEntry> + 'a {
        self.entries.iter().filter(move |e| &e.cell == cell)
    }
}

/// WTP of every attribute level except price, for every cell of the model.
pub fn wtp_table(schema: &AttributeSchema, model: &Model) -> Result<WtpTable> {
    let mut entries = Vec::new();
    for cell in model.cells() {
        entries.extend(cell_entries(schema, model, &cell)?);
    }
    Ok(WtpTable { entries })
}

/// WTP entries of one cell.
pub fn cell_entries(schema: &AttributeSchema, model: &Model, cell: &Cell) -> Result<Vec<WtpEntry>> {
    let price = price_coefficient(schema, model, cell)?;
    let mut out = Vec::new();
    for a in schema.attributes.iter().filter(|a| a.name != schema.price) {
        let levels: Vec<String> =
            if a.is_categorical() { a.levels.clone() } else { alloc::vec![PER_UNIT.to_string()] };
        for level in levels {
            let value = level_contribution(schema, model, cell, &a.name, &level)?.map(|b| -b / price);
            out.push(WtpEntry { cell: cell.clone(), attribute: a.name.clone(), level, value });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rounding_examples() {
        assert!(interval_consistency(0.022, 0.004, 5.26, 3).unwrap());
        let (lo, hi) = ratio_interval(0.022, 0.0005, 0.004, 0.0005).unwrap();
        assert!((lo - 4.777_777).abs() < 1e-5 && (hi - 6.428_571).abs() < 1e-5);
        assert!(interval_consistency(0.196, 0.004, 47.52, 3).unwrap());
        let (lo, hi) = ratio_interval(0.196, 0.0005, 0.004, 0.0005).unwrap();
        assert!((lo - 43.444).abs() < 1e-3 && (hi - 56.143).abs() < 1e-3);
        assert!(!interval_consistency(0.022, 0.007, 10.0, 3).unwrap());
        assert!(interval_consistency(0.022, -0.007, 3.14, 3).unwrap());
    }

    #[test]
    fn degenerate_price_interval() {
        assert!(interval_consistency(0.1, 0.0004, 1.0, 3).is_err());
        assert!(interval_consistency(0.1, 0.004, 1.0, 0).is_err());
    }
}
