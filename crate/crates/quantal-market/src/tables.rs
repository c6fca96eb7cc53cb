//! The published coefficient, threshold, covariate and WTP tables, and the
//! model they describe.

use std::collections::BTreeMap;

use quantal_market_core::covariates::{covariate_index, CovariateCoder, Population};
use quantal_market_core::model::{BindingKind, BindingRule, ScaleLayout, ThresholdLayout, THRESHOLDS};
use quantal_market_core::schema::{AttributeSchema, Cell, Season};
use quantal_market_core::wtp::PER_UNIT;
use quantal_market_core::{Model, ModelSpec, ParameterSet};

use crate::error::{AppError, AppResult};
use crate::io::Fixtures;

/// Rows of `attribute level value-per-cut`, with `None` for excluded cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CutTable {
    pub cuts: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub attribute: String,
    pub level: String,
    pub values: Vec<Option<f64>>,
}

impl CutTable {
    pub fn row(&self, attribute: &str, level: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.attribute == attribute && r.level == level)
    }

    pub fn get(&self, attribute: &str, level: &str, cut: &str) -> Option<f64> {
        let k = self.cuts.iter().position(|c| c == cut)?;
        self.row(attribute, level)?.values[k]
    }

    /// Number of populated cells.
    pub fn populated(&self) -> usize {
        self.rows.iter().map(|r| r.values.iter().flatten().count()).sum()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
}

fn cell_value(s: &str, source: &str, line: usize) -> AppResult<Option<f64>> {
    if s == "-" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| AppError::format(source, format!("line {line}: invalid number `{s}`")))
}

/// Parses the tab-separated `attribute level cut…` layout.
pub fn parse_cut_table(text: &str, source: &str) -> AppResult<CutTable> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or_else(|| AppError::format(source, "empty table"))?;
    if header.len() < 3 || header[0] != "attribute" || header[1] != "level" {
        return Err(AppError::format(source, "header must start with `attribute level`"));
    }
    let cuts: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (line, f) in lines {
        if f.len() != cuts.len() + 2 {
            return Err(AppError::format(source, format!("line {line}: expected {} fields", cuts.len() + 2)));
        }
        let values = f[2..].iter().map(|s| cell_value(s, source, line)).collect::<AppResult<_>>()?;
        rows.push(TableRow { attribute: f[0].to_string(), level: f[1].to_string(), values });
    }
    Ok(CutTable { cuts, rows })
}

/// Thresholds `τ_1..τ_10` per cut from the `threshold cut…` layout.
pub fn parse_thresholds(text: &str, source: &str) -> AppResult<BTreeMap<String, Vec<f64>>> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or_else(|| AppError::format(source, "empty table"))?;
    if header.first() != Some(&"threshold") {
        return Err(AppError::format(source, "header must start with `threshold`"));
    }
    let cuts: Vec<&str> = header[1..].to_vec();
    let mut out: BTreeMap<String, Vec<f64>> = cuts.iter().map(|c| (c.to_string(), Vec::new())).collect();
    for (j, (line, f)) in lines.enumerate() {
        if f.len() != cuts.len() + 1 || f[0] != (j + 1).to_string() {
            return Err(AppError::format(source, format!("line {line}: expected threshold {}", j + 1)));
        }
        for (c, s) in cuts.iter().zip(&f[1..]) {
            let v = cell_value(s, source, line)?.ok_or_else(|| AppError::format(source, format!("line {line}: missing value")))?;
            out.get_mut(*c).expect("cut").push(v);
        }
    }
    if out.values().any(|t| t.len() != THRESHOLDS) {
        return Err(AppError::format(source, format!("expected {THRESHOLDS} thresholds per cut")));
    }
    Ok(out)
}

/// `(covariate, level, value)` rows.
pub fn parse_covariates(text: &str, source: &str) -> AppResult<Vec<(String, String, f64)>> {
    let mut lines = data_lines(text);
    lines.next().ok_or_else(|| AppError::format(source, "empty table"))?;
    lines
        .map(|(line, f)| {
            if f.len() != 3 {
                return Err(AppError::format(source, format!("line {line}: expected 3 fields")));
            }
            let v = cell_value(f[2], source, line)?.ok_or_else(|| AppError::format(source, format!("line {line}: missing value")))?;
            Ok((f[0].to_string(), f[1].to_string(), v))
        })
        .collect()
}

/// Covariate column a table row estimates; `None` for rows giving a base level's implied value.
pub fn covariate_column(covariate: &str, level: &str) -> Option<&'static str> {
    let id = match level {
        PER_UNIT => covariate.to_string(),
        "squared" => format!("{covariate}_sq"),
        _ => format!("{covariate}.{level}"),
    };
    covariate_index(&id).map(|i| quantal_market_core::covariates::COVARIATE_COLUMNS[i])
}

/// Claim, published WTP range and cuts with positive WTP.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRange {
    pub claim: String,
    pub low: f64,
    pub high: f64,
    pub cuts: Vec<String>,
}

pub fn parse_claim_ranges(text: &str, source: &str) -> AppResult<Vec<ClaimRange>> {
    let mut lines = data_lines(text);
    lines.next().ok_or_else(|| AppError::format(source, "empty table"))?;
    lines
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(AppError::format(source, format!("line {line}: expected 4 fields")));
            }
            let num = |s: &str| cell_value(s, source, line)?.ok_or_else(|| AppError::format(source, format!("line {line}: missing value")));
            Ok(ClaimRange {
                claim: f[0].to_string(),
                low: num(f[1])?,
                high: num(f[2])?,
                cuts: f[3].split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            })
        })
        .collect()
}

/// Everything transcribed from the published tables.
#[derive(Debug, Clone)]
pub struct PaperTables {
    pub schema: AttributeSchema,
    pub population: Population,
    pub coefficients: BTreeMap<Season, CutTable>,
    pub thresholds: BTreeMap<String, Vec<f64>>,
    pub covariates: Vec<(String, String, f64)>,
    pub wtp: BTreeMap<Season, CutTable>,
    pub claim_ranges: Vec<ClaimRange>,
}

impl PaperTables {
    pub fn load(fx: &Fixtures) -> AppResult<PaperTables> {
        let mut coefficients = BTreeMap::new();
        let mut wtp = BTreeMap::new();
        for s in Season::ALL {
            let c = format!("coefficients_{s}.tsv");
            coefficients.insert(s, parse_cut_table(&fx.text(&c)?, &c)?);
            let w = format!("wtp_{s}.tsv");
            wtp.insert(s, parse_cut_table(&fx.text(&w)?, &w)?);
        }
        Ok(PaperTables {
            schema: fx.schema()?,
            population: fx.population()?,
            coefficients,
            thresholds: parse_thresholds(&fx.text("thresholds.tsv")?, "thresholds.tsv")?,
            covariates: parse_covariates(&fx.text("covariates.tsv")?, "covariates.tsv")?,
            wtp,
            claim_ranges: parse_claim_ranges(&fx.text("claim_ranges.tsv")?, "claim_ranges.tsv")?,
        })
    }

    /// Coefficient of a coded column in a cell as printed; `None` where excluded.
    fn printed(&self, column: &str, cell: &Cell) -> AppResult<Option<f64>> {
        let (attr, level) = column.split_once('.').unwrap_or((column, PER_UNIT));
        let t = &self.coefficients[&cell.season];
        if t.row(attr, level).is_none() {
            return Err(AppError::format(format!("coefficients_{}.tsv", cell.season), format!("no row `{attr} {level}`")));
        }
        Ok(t.get(attr, level, &cell.cut))
    }

    /// Binding rules implied by the tables. A column is generic when it has one
    /// value wherever the attribute applies; otherwise a cut's coefficient is
    /// shared by the seasons when both print the same value there, and
    /// season-specific when they differ or only one season prints it.
    pub fn spec(&self) -> AppResult<ModelSpec> {
        let schema = &self.schema;
        let mut spec = ModelSpec::new(ThresholdLayout::PerCut, ScaleLayout::WinterRelative);
        for col in schema.columns() {
            let attr = &schema.attributes[col.attribute];
            let cells: Vec<Cell> = schema.cells().into_iter().filter(|c| attr.applies_to(&c.cut)).collect();
            let mut values = Vec::new();
            for c in &cells {
                values.push((c.clone(), self.printed(&col.id, c)?));
            }
            let present: Vec<f64> = values.iter().filter_map(|v| v.1).collect();
            if present.is_empty() {
                continue;
            }
            if present.len() == values.len() && present.iter().all(|v| *v == present[0]) {
                spec.bindings.push(BindingRule::new(&col.id, BindingKind::Generic, &["*"]));
                continue;
            }
            let mut by_cut = Vec::new();
            let mut by_cell = Vec::new();
            for cut in schema.cuts.iter().filter(|c| attr.applies_to(c)) {
                let get = |s: Season| values.iter().find(|(c, _)| c.cut == *cut && c.season == s).and_then(|v| v.1);
                match (get(Season::Winter), get(Season::Summer)) {
                    (Some(w), Some(s)) if w == s => by_cut.push(cut.clone()),
                    (w, s) => {
                        if w.is_some() {
                            by_cell.push(format!("{cut}/winter"));
                        }
                        if s.is_some() {
                            by_cell.push(format!("{cut}/summer"));
                        }
                    }
                }
            }
            if !by_cut.is_empty() {
                spec.bindings.push(BindingRule { column: col.id.clone(), kind: BindingKind::Cut, cells: by_cut });
            }
            if !by_cell.is_empty() {
                spec.bindings.push(BindingRule { column: col.id.clone(), kind: BindingKind::CutSeason, cells: by_cell });
            }
        }
        for (cov, level, _) in &self.covariates {
            if let Some(id) = covariate_column(cov, level) {
                spec.covariates.push(id.to_string());
            }
        }
        spec.validate(schema)?;
        Ok(spec)
    }

    /// The model over both seasons: intercepts and coefficients as printed, one
    /// threshold vector per cut, summer scales fixed at one and the printed
    /// winter scales.
    pub fn pooled_model(&self) -> AppResult<Model> {
        let schema = &self.schema;
        let spec = self.spec()?;
        let mut params = ParameterSet::default();
        for cell in schema.cells() {
            let t = &self.coefficients[&cell.season];
            let src = || format!("coefficients_{}.tsv", cell.season);
            let asc = t.get("asc", "-", &cell.cut).ok_or_else(|| AppError::format(src(), format!("no intercept for {}", cell.cut)))?;
            params.asc.insert(cell.clone(), asc);
            let scale = t.get("scale", "-", &cell.cut).ok_or_else(|| AppError::format(src(), format!("no scale for {}", cell.cut)))?;
            if !(scale > 0.0) {
                return Err(AppError::format(src(), format!("scale of {} must be positive", cell.cut)));
            }
            match (cell.season, scale == 1.0) {
                (_, true) => {}
                (Season::Winter, false) => {
                    params.mu.insert(cell.clone(), scale.ln());
                }
                (Season::Summer, false) => {
                    return Err(AppError::format(src(), "summer scales are the reference and must be one"));
                }
            }
            for col in schema.columns() {
                if let (Some(id), Some(v)) = (spec.param_for(schema, &col.id, &cell), self.printed(&col.id, &cell)?) {
                    params.beta.insert(id, v);
                }
            }
        }
        for cut in &schema.cuts {
            let t = self
                .thresholds
                .get(cut)
                .ok_or_else(|| AppError::format("thresholds.tsv", format!("no thresholds for {cut}")))?;
            params.tau.insert(cut.clone(), t.clone());
        }
        for (cov, level, v) in &self.covariates {
            if let Some(id) = covariate_column(cov, level) {
                params.gamma.insert(id.to_string(), *v);
            }
        }
        let model = Model { spec, scaling: CovariateCoder::fit_population(&self.population), params };
        model.validate(schema)?;
        Ok(model)
    }
}

/// The part of a model that concerns one season.
pub fn restrict(schema: &AttributeSchema, model: &Model, season: Season) -> Model {
    let mut m = model.clone();
    m.params.asc.retain(|c, _| c.season == season);
    m.params.mu.retain(|c, _| c.season == season);
    let used: std::collections::BTreeSet<String> = m
        .cells()
        .iter()
        .flat_map(|c| schema.columns().into_iter().filter_map(|col| m.spec.param_for(schema, &col.id, c)))
        .collect();
    m.params.beta.retain(|id, _| used.contains(id));
    m
}

/// Coefficients in the published layout: scale and intercept rows, then each
/// attribute level, with base levels carrying minus the sum of the others.
pub fn coefficient_table(schema: &AttributeSchema, model: &Model, season: Season) -> AppResult<CutTable> {
    let cells: Vec<Cell> = schema.cuts.iter().map(|c| Cell::new(c.clone(), season)).collect();
    let mut rows = vec![
        TableRow {
            attribute: "scale".into(),
            level: "-".into(),
            values: cells.iter().map(|c| model.has_cell(c).then(|| model.params.lambda(c))).collect(),
        },
        TableRow { attribute: "asc".into(), level: "-".into(), values: cells.iter().map(|c| model.params.asc.get(c).copied()).collect() },
    ];
    for a in &schema.attributes {
        let levels: Vec<String> = if a.is_categorical() { a.levels.clone() } else { vec![PER_UNIT.to_string()] };
        for level in levels {
            let mut values = Vec::new();
            for c in &cells {
                values.push(if model.has_cell(c) {
                    quantal_market_core::wtp::level_contribution(schema, model, c, &a.name, &level)?
                } else {
                    None
                });
            }
            rows.push(TableRow { attribute: a.name.clone(), level, values });
        }
    }
    Ok(CutTable { cuts: schema.cuts.clone(), rows })
}

/// Renders a table in the tab-separated layout.
pub fn render_cut_table(table: &CutTable, comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        out.push_str(&format!("# {comment}\n"));
    }
    out.push_str("attribute\tlevel");
    for c in &table.cuts {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!("{}\t{}", r.attribute, r.level));
        for v in &r.values {
            out.push('\t');
            match v {
                Some(x) => out.push_str(&format!("{x}")),
                None => out.push('-'),
            }
        }
        out.push('\n');
    }
    out
}
