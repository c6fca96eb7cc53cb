//! Attribute schema, level coding and design rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Summer,
}

impl Season {
    pub const ALL: [Season; 2] = [Season::Winter, Season::Summer];

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Summer => "summer",
        }
    }

    pub fn other(self) -> Season {
        match self {
            Season::Winter => Season::Summer,
            Season::Summer => Season::Winter,
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Season {
    type Err = Error;
    fn from_str(s: &str) -> Result<Season> {
        match s {
            "winter" => Ok(Season::Winter),
            "summer" => Ok(Season::Summer),
            _ => Err(Error::Data(format!("unknown season `{s}`"))),
        }
    }
}

/// A (cut, season) combination. Rendered as `cut/season`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub cut: String,
    pub season: Season,
}

impl Cell {
    pub fn new(cut: impl Into<String>, season: Season) -> Cell {
        Cell { cut: cut.into(), season }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cut, self.season)
    }
}

impl FromStr for Cell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Cell> {
        let (cut, season) = s
            .split_once('/')
            .ok_or_else(|| Error::Data(format!("cell `{s}` is not of the form cut/season")))?;
        Ok(Cell { cut: cut.to_string(), season: season.parse()? })
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Cell, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A categorical level name or a continuous value.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelValue {
    Level(String),
    Value(f64),
}

impl LevelValue {
    pub fn level(s: &str) -> LevelValue {
        LevelValue::Level(s.to_string())
    }
}

impl fmt::Display for LevelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelValue::Level(s) => f.write_str(s),
            LevelValue::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LevelValue {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            LevelValue::Level(l) => s.serialize_str(l),
            LevelValue::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LevelValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<LevelValue, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = LevelValue;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a level name or a number")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<LevelValue, E> {
                Ok(LevelValue::Level(v.to_string()))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> core::result::Result<LevelValue, E> {
                Ok(LevelValue::Value(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<LevelValue, E> {
                Ok(LevelValue::Value(v as f64))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<LevelValue, E> {
                Ok(LevelValue::Value(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    /// Effects coded: non-base level `i` is the unit vector `e_i`, the base level is all `-1`.
    Effects,
    /// Two-level claim coded `+1` / `-1`.
    Binary,
    /// Enters as its raw value.
    Continuous,
}

/// Values a continuous attribute takes in the design, with their unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLevels {
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_cuts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_cut: BTreeMap<String, ContinuousLevels>,
}

impl AttributeDef {
    pub fn is_categorical(&self) -> bool {
        self.kind != AttributeKind::Continuous
    }

    pub fn applies_to(&self, cut: &str) -> bool {
        !self.excluded_cuts.iter().any(|c| c == cut)
    }

    pub fn base_level(&self) -> Option<&str> {
        self.base.as_deref()
    }

    /// Non-base levels in declaration order; one coded column each.
    pub fn coded_levels(&self) -> impl Iterator<Item = &str> {
        let base = self.base.as_deref();
        self.levels.iter().map(String::as_str).filter(move |l| Some(*l) != base)
    }

    /// Column ids owned by this attribute.
    pub fn column_ids(&self) -> Vec<String> {
        if self.is_categorical() {
            self.coded_levels().map(|l| format!("{}.{}", self.name, l)).collect()
        } else {
            alloc::vec![self.name.clone()]
        }
    }

    /// Design levels of a continuous attribute for a cut.
    pub fn design_values(&self, cut: &str) -> Option<&[f64]> {
        if self.is_categorical() || !self.applies_to(cut) {
            return None;
        }
        match self.per_cut.get(cut) {
            Some(l) => Some(&l.values),
            None if !self.values.is_empty() => Some(&self.values),
            None => None,
        }
    }

    pub fn unit_for(&self, cut: &str) -> Option<&str> {
        self.per_cut.get(cut).map(|l| l.unit.as_str()).or(self.unit.as_deref())
    }

    /// Effects code of a categorical level.
    pub fn code(&self, level: &str) -> Result<Vec<f64>> {
        let base = self.base.as_deref();
        if !self.levels.iter().any(|l| l == level) {
            return Err(Error::UnknownLevel { attribute: self.name.clone(), level: level.to_string() });
        }
        if Some(level) == base {
            return Ok(self.coded_levels().map(|_| -1.0).collect());
        }
        Ok(self.coded_levels().map(|l| if l == level { 1.0 } else { 0.0 }).collect())
    }

    fn validate(&self, cuts: &[String]) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(format!("attribute `{}`: {m}", self.name)));
        if self.name.is_empty() || self.name.contains(['.', '@', '/', '#', ' ']) {
            return bad("invalid name".into());
        }
        for c in &self.excluded_cuts {
            if !cuts.contains(c) {
                return bad(format!("excluded cut `{c}` is not a cut"));
            }
        }
        if self.excluded_cuts.len() >= cuts.len() {
            return bad("excluded from every cut".into());
        }
        match self.kind {
            AttributeKind::Effects | AttributeKind::Binary => {
                if self.levels.len() < 2 {
                    return bad("needs at least two levels".into());
                }
                if self.kind == AttributeKind::Binary && self.levels.len() != 2 {
                    return bad("binary claims have exactly two levels".into());
                }
                let set: BTreeSet<&String> = self.levels.iter().collect();
                if set.len() != self.levels.len() {
                    return bad("duplicate level".into());
                }
                if self.levels.iter().any(|l| l.is_empty() || l.contains(['.', '@', '/', '#', ' '])) {
                    return bad("invalid level name".into());
                }
                match &self.base {
                    Some(b) if self.levels.contains(b) => {}
                    _ => return bad("base level must be one of the levels".into()),
                }
                if !self.values.is_empty() || !self.per_cut.is_empty() {
                    return bad("categorical attributes take no values".into());
                }
            }
            AttributeKind::Continuous => {
                if !self.levels.is_empty() || self.base.is_some() {
                    return bad("continuous attributes take no levels".into());
                }
                if !self.values.is_empty() && !self.per_cut.is_empty() {
                    return bad("give either values or per_cut, not both".into());
                }
                for c in self.per_cut.keys() {
                    if !cuts.contains(c) {
                        return bad(format!("per_cut names unknown cut `{c}`"));
                    }
                }
                for c in cuts.iter().filter(|c| self.applies_to(c)) {
                    match self.design_values(c) {
                        Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => {}
                        _ => return bad(format!("no finite design values for cut `{c}`")),
                    }
                }
            }
        }
        Ok(())
    }
}

/// The experiment's attribute schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub cuts: Vec<String>,
    /// Name of the continuous attribute holding the price.
    pub price: String,
    /// Name of the continuous attribute holding the net weight.
    pub weight: String,
    pub attributes: Vec<AttributeDef>,
}

/// A coded column of the design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub id: String,
    pub attribute: usize,
    /// Level behind the column; `None` for continuous attributes.
    pub level: Option<String>,
}

impl AttributeSchema {
    pub fn validate(&self) -> Result<()> {
        if self.cuts.is_empty() {
            return Err(Error::Schema("no cuts".into()));
        }
        let set: BTreeSet<&String> = self.cuts.iter().collect();
        if set.len() != self.cuts.len() {
            return Err(Error::Schema("duplicate cut".into()));
        }
        if self.cuts.iter().any(|c| c.is_empty() || c.contains(['.', '@', '/', '#', '+', ' ', '*'])) {
            return Err(Error::Schema("invalid cut name".into()));
        }
        let names: BTreeSet<&String> = self.attributes.iter().map(|a| &a.name).collect();
        if names.len() != self.attributes.len() {
            return Err(Error::Schema("duplicate attribute".into()));
        }
        for a in &self.attributes {
            a.validate(&self.cuts)?;
        }
        for role in [&self.price, &self.weight] {
            let a = self
                .attribute(role)
                .ok_or_else(|| Error::Schema(format!("attribute `{role}` is not declared")))?;
            if a.kind != AttributeKind::Continuous || !a.excluded_cuts.is_empty() {
                return Err(Error::Schema(format!("`{role}` must be continuous and apply to every cut")));
            }
        }
        if self.price == self.weight {
            return Err(Error::Schema("price and weight must differ".into()));
        }
        Ok(())
    }

    pub fn seasons(&self) -> [Season; 2] {
        Season::ALL
    }

    pub fn has_cut(&self, cut: &str) -> bool {
        self.cuts.iter().any(|c| c == cut)
    }

    pub fn check_cut(&self, cut: &str) -> Result<()> {
        if self.has_cut(cut) {
            Ok(())
        } else {
            Err(Error::UnknownCut(cut.to_string()))
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.cuts
            .iter()
            .flat_map(|c| Season::ALL.iter().map(move |s| Cell::new(c.clone(), *s)))
            .collect()
    }

    /// All coded columns in schema order.
    pub fn columns(&self) -> Vec<Column> {
        let mut out = Vec::new();
        for (i, a) in self.attributes.iter().enumerate() {
            if a.is_categorical() {
                for l in a.coded_levels() {
                    out.push(Column { id: format!("{}.{}", a.name, l), attribute: i, level: Some(l.to_string()) });
                }
            } else {
                out.push(Column { id: a.name.clone(), attribute: i, level: None });
            }
        }
        out
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns().iter().position(|c| c.id == id)
    }

    /// Codes a product profile for a cut and season.
    pub fn build_row(&self, product: &Product, season: Season) -> Result<DesignRow> {
        self.check_cut(&product.cut)?;
        for name in product.levels.keys() {
            let a = self.attribute(name).ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
            if !a.applies_to(&product.cut) {
                return Err(Error::NotApplicable { attribute: name.clone(), cut: product.cut.clone() });
            }
        }
        let mut coded = Vec::new();
        for a in &self.attributes {
            let width = if a.is_categorical() { a.levels.len() - 1 } else { 1 };
            if !a.applies_to(&product.cut) {
                coded.extend(core::iter::repeat(0.0).take(width));
                continue;
            }
            let v = product
                .levels
                .get(&a.name)
                .ok_or_else(|| Error::MissingAttribute { attribute: a.name.clone(), cut: product.cut.clone() })?;
            match (a.is_categorical(), v) {
                (true, LevelValue::Level(l)) => coded.extend(a.code(l)?),
                (false, LevelValue::Value(x)) if x.is_finite() => coded.push(*x),
                _ => {
                    return Err(Error::UnknownLevel { attribute: a.name.clone(), level: v.to_string() });
                }
            }
        }
        let get = |name: &str| match product.levels.get(name) {
            Some(LevelValue::Value(x)) => *x,
            _ => f64::NAN,
        };
        let (price, weight) = (get(&self.price), get(&self.weight));
        if !(price > 0.0) {
            return Err(Error::Data(format!("price must be positive, got {price}")));
        }
        if !(weight > 0.0) {
            return Err(Error::Data(format!("weight must be positive, got {weight}")));
        }
        Ok(DesignRow { cut: product.cut.clone(), season, coded, price, weight })
    }

    /// Recovers the product profile from a coded row.
    pub fn decode(&self, row: &DesignRow) -> Result<Product> {
        self.check_cut(&row.cut)?;
        let mut levels = BTreeMap::new();
        let mut k = 0;
        for a in &self.attributes {
            let width = if a.is_categorical() { a.levels.len() - 1 } else { 1 };
            let slice = row
                .coded
                .get(k..k + width)
                .ok_or_else(|| Error::Data("coded row is too short".into()))?;
            k += width;
            if !a.applies_to(&row.cut) {
                continue;
            }
            if a.is_categorical() {
                let level = a
                    .levels
                    .iter()
                    .find(|l| a.code(l).map(|c| c == slice).unwrap_or(false))
                    .ok_or_else(|| Error::Data(format!("row does not code a level of `{}`", a.name)))?;
                levels.insert(a.name.clone(), LevelValue::Level(level.clone()));
            } else {
                levels.insert(a.name.clone(), LevelValue::Value(slice[0]));
            }
        }
        if k != row.coded.len() {
            return Err(Error::Data("coded row is too long".into()));
        }
        Ok(Product { cut: row.cut.clone(), levels })
    }
}

/// A product profile: a cut plus a level for each applicable attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub cut: String,
    pub levels: BTreeMap<String, LevelValue>,
}

/// A coded product in a season. `coded` follows [`AttributeSchema::columns`];
/// columns of non-applicable attributes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub cut: String,
    pub season: Season,
    pub coded: Vec<f64>,
    pub price: f64,
    pub weight: f64,
}

impl DesignRow {
    pub fn cell(&self) -> Cell {
        Cell::new(self.cut.clone(), self.season)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn toy_schema() -> AttributeSchema {
        let effects = |name: &str, levels: &[&str], base: &str| AttributeDef {
            name: name.into(),
            kind: AttributeKind::Effects,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            base: Some(base.into()),
            excluded_cuts: vec![],
            unit: None,
            values: vec![],
            per_cut: BTreeMap::new(),
        };
        let cont = |name: &str, values: &[f64]| AttributeDef {
            name: name.into(),
            kind: AttributeKind::Continuous,
            levels: vec![],
            base: None,
            excluded_cuts: vec![],
            unit: Some("u".into()),
            values: values.to_vec(),
            per_cut: BTreeMap::new(),
        };
        let mut marbling = effects("marbling", &["not_marbled", "somewhat_marbled"], "somewhat_marbled");
        marbling.excluded_cuts = vec!["ground".into()];
        AttributeSchema {
            cuts: vec!["ground".into(), "roast".into()],
            price: "price".into(),
            weight: "weight".into(),
            attributes: vec![
                effects("packaging", &["vacuum", "tray", "fresh"], "fresh"),
                marbling,
                cont("price", &[6.0, 12.0]),
                cont("weight", &[12.0, 16.0]),
            ],
        }
    }

    #[test]
    fn effects_coding_of_three_levels() {
        let s = toy_schema();
        let p = s.attribute("packaging").unwrap();
        assert_eq!(p.code("vacuum").unwrap(), vec![1.0, 0.0]);
        assert_eq!(p.code("tray").unwrap(), vec![0.0, 1.0]);
        assert_eq!(p.code("fresh").unwrap(), vec![-1.0, -1.0]);
        assert!(matches!(p.code("shrink"), Err(Error::UnknownLevel { .. })));
        assert_eq!(p.column_ids(), vec!["packaging.vacuum", "packaging.tray"]);
    }

    #[test]
    fn excluded_attribute_is_rejected_and_zero_coded() {
        let s = toy_schema();
        s.validate().unwrap();
        let mut levels = BTreeMap::new();
        levels.insert("packaging".into(), LevelValue::level("tray"));
        levels.insert("price".into(), LevelValue::Value(6.0));
        levels.insert("weight".into(), LevelValue::Value(12.0));
        let ground = Product { cut: "ground".into(), levels: levels.clone() };
        let row = s.build_row(&ground, Season::Winter).unwrap();
        assert_eq!(row.coded, vec![0.0, 1.0, 0.0, 6.0, 12.0]);
        assert_eq!(s.decode(&row).unwrap(), ground);

        let mut bad = ground.clone();
        bad.levels.insert("marbling".into(), LevelValue::level("not_marbled"));
        assert!(matches!(s.build_row(&bad, Season::Winter), Err(Error::NotApplicable { .. })));

        let roast = Product { cut: "roast".into(), levels };
        assert!(matches!(s.build_row(&roast, Season::Summer), Err(Error::MissingAttribute { .. })));
        assert!(matches!(
            s.build_row(&Product { cut: "flank".into(), levels: BTreeMap::new() }, Season::Summer),
            Err(Error::UnknownCut(_))
        ));
    }

    #[test]
    fn invalid_schemas_are_rejected() {
        let mut s = toy_schema();
        s.attributes[0].base = Some("paper".into());
        assert!(s.validate().is_err());
        let mut s = toy_schema();
        s.price = "cost".into();
        assert!(s.validate().is_err());
        let mut s = toy_schema();
        s.attributes[1].excluded_cuts = vec!["ground".into(), "roast".into()];
        assert!(s.validate().is_err());
    }

    #[test]
    fn cells_render_and_parse() {
        let c = Cell::new("new_york", Season::Summer);
        assert_eq!(c.to_string(), "new_york/summer");
        assert_eq!("new_york/summer".parse::<Cell>().unwrap(), c);
        assert!("new_york".parse::<Cell>().is_err());
    }
}
