//! Model specifications, parameter sets and fitted models.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::covariates::{covariate_index, CovariateCoder};
use crate::dataset::MAX_QUANTITY;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Cell, Season};

/// Number of thresholds `τ_1..τ_10`; `τ_1` is pinned at zero.
pub const THRESHOLDS: usize = MAX_QUANTITY as usize;

/// How a coded column's coefficient is shared across cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingKind {
    /// One coefficient for every covered cell.
    Generic,
    /// One coefficient per cut, shared by its seasons.
    Cut,
    /// One coefficient per (cut, season).
    CutSeason,
}

fn all_cells() -> Vec<String> {
    alloc::vec!["*".to_string()]
}

/// Coefficient sharing rule for one coded column. `cells` holds patterns:
/// `*` for every cell, `cut` for both seasons of a cut, or `cut/season`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingRule {
    pub column: String,
    pub kind: BindingKind,
    #[serde(default = "all_cells")]
    pub cells: Vec<String>,
}

impl BindingRule {
    pub fn new(column: &str, kind: BindingKind, cells: &[&str]) -> BindingRule {
        BindingRule { column: column.to_string(), kind, cells: cells.iter().map(|s| s.to_string()).collect() }
    }

    pub fn covers(&self, cell: &Cell) -> bool {
        self.cells.iter().any(|p| pattern_matches(p, cell))
    }

    /// Id of the coefficient this rule assigns to `cell` (assumed covered).
    pub fn param_id(&self, cell: &Cell) -> String {
        match self.kind {
            BindingKind::Generic if self.cells.iter().any(|p| p == "*") => self.column.clone(),
            BindingKind::Generic => {
                let mut p = self.cells.clone();
                p.sort();
                format!("{}@{}", self.column, p.join("+"))
            }
            BindingKind::Cut => format!("{}@{}", self.column, cell.cut),
            BindingKind::CutSeason => format!("{}@{}", self.column, cell),
        }
    }
}

fn pattern_matches(p: &str, cell: &Cell) -> bool {
    if p == "*" {
        return true;
    }
    match p.split_once('/') {
        Some((cut, season)) => cut == cell.cut && season == cell.season.as_str(),
        None => p == cell.cut,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdLayout {
    /// One threshold vector per cut, shared by both seasons.
    PerCut,
    /// One threshold vector per (cut, season).
    PerCutSeason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleLayout {
    /// Every scale stays at its given value (one by default).
    Fixed,
    /// Winter scale of each cut is free relative to that cut's summer scale.
    WinterRelative,
    /// Summer scale of each cut is free relative to that cut's winter scale.
    SummerRelative,
}

impl ScaleLayout {
    /// Season whose scales are estimated, if any.
    pub fn free_season(self) -> Option<Season> {
        match self {
            ScaleLayout::Fixed => None,
            ScaleLayout::WinterRelative => Some(Season::Winter),
            ScaleLayout::SummerRelative => Some(Season::Summer),
        }
    }
}

/// Which coefficients exist and how they are shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub thresholds: ThresholdLayout,
    pub scale: ScaleLayout,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default, rename = "bind")]
    pub bindings: Vec<BindingRule>,
}

impl ModelSpec {
    pub fn new(thresholds: ThresholdLayout, scale: ScaleLayout) -> ModelSpec {
        ModelSpec { thresholds, scale, covariates: Vec::new(), bindings: Vec::new() }
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.thresholds == ThresholdLayout::PerCutSeason && self.scale != ScaleLayout::Fixed {
            return Err(Error::Unidentified {
                parameter: "scale".into(),
                reason: "season scales cannot be separated from season-specific thresholds".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for c in &self.covariates {
            if covariate_index(c).is_none() {
                return Err(Error::Spec(format!("unknown covariate `{c}`")));
            }
            if !seen.insert(c) {
                return Err(Error::Spec(format!("covariate `{c}` listed twice")));
            }
        }
        let columns = schema.columns();
        let cells = schema.cells();
        let mut covered: BTreeSet<(String, Cell)> = BTreeSet::new();
        for r in &self.bindings {
            let col = columns
                .iter()
                .find(|c| c.id == r.column)
                .ok_or_else(|| Error::Spec(format!("binding names unknown column `{}`", r.column)))?;
            let attr = &schema.attributes[col.attribute];
            if r.cells.is_empty() {
                return Err(Error::Spec(format!("binding for `{}` covers no cell", r.column)));
            }
            for p in &r.cells {
                let cut = p.split_once('/').map(|(c, _)| c).unwrap_or(p);
                if p != "*" {
                    schema.check_cut(cut)?;
                    if let Some((_, s)) = p.split_once('/') {
                        s.parse::<Season>()?;
                    }
                    if !attr.applies_to(cut) {
                        return Err(Error::NotApplicable { attribute: attr.name.clone(), cut: cut.to_string() });
                    }
                }
            }
            for cell in cells.iter().filter(|c| r.covers(c) && attr.applies_to(&c.cut)) {
                if !covered.insert((r.column.clone(), cell.clone())) {
                    return Err(Error::Spec(format!("column `{}` is bound twice in cell {cell}", r.column)));
                }
            }
        }
        Ok(())
    }

    /// Id of the coefficient on `column` in `cell`, or `None` when the column is excluded there.
    pub fn param_for(&self, schema: &AttributeSchema, column: &str, cell: &Cell) -> Option<String> {
        let col = schema.columns().into_iter().find(|c| c.id == column)?;
        if !schema.attributes[col.attribute].applies_to(&cell.cut) {
            return None;
        }
        self.bindings.iter().find(|r| r.column == column && r.covers(cell)).map(|r| r.param_id(cell))
    }

    /// Key of the threshold vector used by a cell.
    pub fn threshold_key(&self, cell: &Cell) -> String {
        match self.thresholds {
            ThresholdLayout::PerCut => cell.cut.clone(),
            ThresholdLayout::PerCutSeason => cell.to_string(),
        }
    }

    /// Removes one coefficient by narrowing the rule that produced it.
    pub fn without_param(&self, schema: &AttributeSchema, id: &str) -> Result<ModelSpec> {
        if let Some(pos) = self.covariates.iter().position(|c| c == id) {
            let mut s = self.clone();
            s.covariates.remove(pos);
            return Ok(s);
        }
        let cells = schema.cells();
        let mut out = self.clone();
        for (k, r) in self.bindings.iter().enumerate() {
            let hit: Vec<&Cell> = cells.iter().filter(|c| r.covers(c) && r.param_id(c) == id).collect();
            if hit.is_empty() {
                continue;
            }
            let keep: Vec<String> = match r.kind {
                BindingKind::Generic => Vec::new(),
                _ => cells
                    .iter()
                    .filter(|c| {
                        let applies = schema
                            .columns()
                            .iter()
                            .find(|col| col.id == r.column)
                            .map(|col| schema.attributes[col.attribute].applies_to(&c.cut))
                            .unwrap_or(false);
                        applies && r.covers(c) && r.param_id(c) != id
                    })
                    .map(|c| c.to_string())
                    .collect(),
            };
            if keep.is_empty() {
                out.bindings.remove(k);
            } else {
                out.bindings[k].cells = keep;
            }
            return Ok(out);
        }
        Err(Error::Spec(format!("no coefficient `{id}` in the specification")))
    }
}

/// Natural-scale parameter values keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    #[serde(default)]
    pub asc: BTreeMap<Cell, f64>,
    #[serde(default)]
    pub beta: BTreeMap<String, f64>,
    #[serde(default)]
    pub gamma: BTreeMap<String, f64>,
    /// `τ_1..τ_10` per threshold key, with `τ_1 = 0`.
    #[serde(default)]
    pub tau: BTreeMap<String, Vec<f64>>,
    /// Log scale `μ` per cell; absent means zero.
    #[serde(default)]
    pub mu: BTreeMap<Cell, f64>,
}

impl ParameterSet {
    pub fn lambda(&self, cell: &Cell) -> f64 {
        libm::exp(self.mu.get(cell).copied().unwrap_or(0.0))
    }

    /// Checks the threshold vectors: ten entries, first zero, strictly increasing.
    pub fn check_thresholds(&self) -> Result<()> {
        for (k, t) in &self.tau {
            if t.len() != THRESHOLDS {
                return Err(Error::Infeasible(format!("threshold vector `{k}` has {} entries", t.len())));
            }
            if t[0] != 0.0 {
                return Err(Error::Infeasible(format!("first threshold of `{k}` is not zero")));
            }
            if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Infeasible(format!("thresholds of `{k}` are not strictly increasing")));
            }
        }
        for (c, m) in &self.mu {
            if !m.is_finite() {
                return Err(Error::Infeasible(format!("scale of {c} is not finite")));
            }
        }
        Ok(())
    }

    /// Flat view `id -> value` using the reporting ids.
    pub fn flat(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (c, v) in &self.asc {
            out.insert(format!("asc@{c}"), *v);
        }
        for (k, v) in &self.beta {
            out.insert(k.clone(), *v);
        }
        for (k, v) in &self.gamma {
            out.insert(k.clone(), *v);
        }
        for (k, t) in &self.tau {
            for (j, v) in t.iter().enumerate().skip(1) {
                out.insert(format!("tau@{k}#{}", j + 1), *v);
            }
        }
        for (c, v) in &self.mu {
            out.insert(format!("mu@{c}"), *v);
        }
        out
    }
}

/// A specification with its parameter values and covariate coding: everything a
/// forecast or WTP computation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub scaling: CovariateCoder,
    pub params: ParameterSet,
}

impl Model {
    /// Cells the model has intercepts for.
    pub fn cells(&self) -> Vec<Cell> {
        self.params.asc.keys().cloned().collect()
    }

    pub fn has_cell(&self, cell: &Cell) -> bool {
        self.params.asc.contains_key(cell)
    }

    /// Coefficient on `column` in `cell`; `None` when excluded or unestimated.
    pub fn coefficient(&self, schema: &AttributeSchema, column: &str, cell: &Cell) -> Option<f64> {
        let id = self.spec.param_for(schema, column, cell)?;
        self.params.beta.get(&id).copied()
    }

    pub fn thresholds(&self, cell: &Cell) -> Option<&[f64]> {
        self.params.tau.get(&self.spec.threshold_key(cell)).map(Vec::as_slice)
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        self.spec.validate(schema)?;
        self.params.check_thresholds()?;
        for c in self.params.asc.keys() {
            schema.check_cut(&c.cut)?;
            if self.thresholds(c).is_none() {
                return Err(Error::Spec(format!("no thresholds for {c}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::toy_schema;

    #[test]
    fn binding_ids_by_kind() {
        let ground_w = Cell::new("ground", Season::Winter);
        let g = BindingRule::new("packaging.tray", BindingKind::Generic, &["*"]);
        assert_eq!(g.param_id(&ground_w), "packaging.tray");
        let sub = BindingRule::new("packaging.tray", BindingKind::Generic, &["roast", "ground"]);
        assert_eq!(sub.param_id(&ground_w), "packaging.tray@ground+roast");
        let c = BindingRule::new("price", BindingKind::Cut, &["*"]);
        assert_eq!(c.param_id(&ground_w), "price@ground");
        let cs = BindingRule::new("price", BindingKind::CutSeason, &["ground/winter"]);
        assert_eq!(cs.param_id(&ground_w), "price@ground/winter");
        assert!(!cs.covers(&Cell::new("ground", Season::Summer)));
    }

    #[test]
    fn spec_validation() {
        let s = toy_schema();
        let mut spec = ModelSpec::new(ThresholdLayout::PerCut, ScaleLayout::WinterRelative);
        spec.bindings.push(BindingRule::new("marbling.not_marbled", BindingKind::Cut, &["*"]));
        spec.validate(&s).unwrap();
        assert_eq!(spec.param_for(&s, "marbling.not_marbled", &Cell::new("ground", Season::Winter)), None);

        spec.bindings.push(BindingRule::new("marbling.not_marbled", BindingKind::Generic, &["roast/summer"]));
        assert!(spec.validate(&s).is_err());

        let mut bad = ModelSpec::new(ThresholdLayout::PerCut, ScaleLayout::Fixed);
        bad.bindings.push(BindingRule::new("marbling.not_marbled", BindingKind::Cut, &["ground"]));
        assert!(matches!(bad.validate(&s), Err(Error::NotApplicable { .. })));

        let unident = ModelSpec::new(ThresholdLayout::PerCutSeason, ScaleLayout::WinterRelative);
        assert!(matches!(unident.validate(&s), Err(Error::Unidentified { .. })));
    }

    #[test]
    fn removing_a_parameter_narrows_its_rule() {
        let s = toy_schema();
        let mut spec = ModelSpec::new(ThresholdLayout::PerCut, ScaleLayout::Fixed);
        spec.bindings.push(BindingRule::new("price", BindingKind::Cut, &["*"]));
        spec.covariates.push("age".into());
        let r = spec.without_param(&s, "price@ground").unwrap();
        let roast = Cell::new("roast", Season::Winter);
        assert_eq!(r.param_for(&s, "price", &roast).as_deref(), Some("price@roast"));
        assert_eq!(r.param_for(&s, "price", &Cell::new("ground", Season::Summer)), None);
        let r = r.without_param(&s, "price@roast").unwrap();
        assert!(r.bindings.is_empty());
        assert!(spec.without_param(&s, "age").unwrap().covariates.is_empty());
        assert!(spec.without_param(&s, "price@flank").is_err());
    }
}
