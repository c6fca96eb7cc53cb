//! Text file formats: TOML schema, population, model and scenario files; CSV
//! choices, respondents and design files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use quantal_market_core::covariates::{Field, Population};
use quantal_market_core::design::{ChoiceTask, Design};
use quantal_market_core::estimate::EstimationResult;
use quantal_market_core::schema::{AttributeSchema, LevelValue, Product, Season};
use quantal_market_core::{ChoiceObservation, Dataset, Model, ModelSpec, RespondentProfile};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Environment variable naming a directory that replaces the bundled fixtures.
pub const FIXTURE_ENV: &str = "QUANTAL_MARKET_FIXTURES";

const BUNDLED: &[(&str, &str)] = &[
    ("schema.toml", include_str!("../fixtures/schema.toml")),
    ("population.toml", include_str!("../fixtures/population.toml")),
    ("coefficients_winter.tsv", include_str!("../fixtures/coefficients_winter.tsv")),
    ("coefficients_summer.tsv", include_str!("../fixtures/coefficients_summer.tsv")),
    ("thresholds.tsv", include_str!("../fixtures/thresholds.tsv")),
    ("covariates.tsv", include_str!("../fixtures/covariates.tsv")),
    ("wtp_winter.tsv", include_str!("../fixtures/wtp_winter.tsv")),
    ("wtp_summer.tsv", include_str!("../fixtures/wtp_summer.tsv")),
    ("claim_ranges.tsv", include_str!("../fixtures/claim_ranges.tsv")),
];

/// Source of the fixture files: the copies compiled into the binary, or a directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fixtures {
    dir: Option<PathBuf>,
}

impl Fixtures {
    pub fn bundled() -> Fixtures {
        Fixtures { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Fixtures {
        Fixtures { dir: Some(dir.into()) }
    }

    /// The directory in [`FIXTURE_ENV`] if set, the bundled copies otherwise.
    pub fn from_env() -> Fixtures {
        match std::env::var_os(FIXTURE_ENV) {
            Some(d) if !d.is_empty() => Fixtures::at(PathBuf::from(d)),
            _ => Fixtures::bundled(),
        }
    }

    pub fn text(&self, name: &str) -> AppResult<String> {
        match &self.dir {
            Some(d) => read_text(&d.join(name)),
            None => BUNDLED
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .ok_or_else(|| AppError::format(name, "no bundled fixture of this name")),
        }
    }

    pub fn schema(&self) -> AppResult<AttributeSchema> {
        parse_schema(&self.text("schema.toml")?, "schema.toml")
    }

    pub fn population(&self) -> AppResult<Population> {
        parse_population(&self.text("population.toml")?, "population.toml")
    }
}

pub fn read_text(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn parse_schema(text: &str, source: &str) -> AppResult<AttributeSchema> {
    let s: AttributeSchema = toml::from_str(text).map_err(|e| AppError::format(source, e))?;
    s.validate()?;
    Ok(s)
}

pub fn schema_to_toml(schema: &AttributeSchema) -> AppResult<String> {
    toml::to_string(schema).map_err(|e| AppError::format("schema", e))
}

/// One table per profile field mapping category names to shares.
pub fn parse_population(text: &str, source: &str) -> AppResult<Population> {
    let raw: BTreeMap<String, BTreeMap<String, f64>> = toml::from_str(text).map_err(|e| AppError::format(source, e))?;
    let mut shares = BTreeMap::new();
    for (name, cats) in raw {
        let field: Field = name.parse()?;
        let mut list = Vec::new();
        for (cat, w) in cats {
            list.push((field.parse_code(&cat)?, w));
        }
        list.sort_by_key(|x| x.0);
        shares.insert(field, list);
    }
    Ok(Population::new(shares)?)
}

pub fn population_to_toml(pop: &Population) -> String {
    let mut out = String::new();
    for f in Field::ALL {
        out.push_str(&format!("[{f}]\n"));
        for (code, w) in pop.shares(f) {
            out.push_str(&format!("{} = {w}\n", toml_key(&category_name(f, *code))));
        }
        out.push('\n');
    }
    out
}

fn toml_key(k: &str) -> String {
    if k.chars().all(|c| c.is_ascii_alphabetic() || c == '_') {
        k.to_string()
    } else {
        format!("\"{k}\"")
    }
}

/// Category name of a field code.
pub fn category_name(field: Field, code: u32) -> String {
    let mut p = RespondentProfile::default();
    match p.set(field, code) {
        Ok(()) => profile_value(&p, field),
        Err(_) => code.to_string(),
    }
}

fn profile_value(p: &RespondentProfile, field: Field) -> String {
    match field {
        Field::Education => p.education.to_string(),
        Field::Dwelling => p.dwelling.to_string(),
        Field::HouseholdSize => p.household_size.to_string(),
        Field::IncomeBracket => p.income_bracket.to_string(),
        Field::State => p.state.to_string(),
        Field::PurchaseFrequency => p.purchase_frequency.to_string(),
        Field::Gender => p.gender.to_string(),
        Field::AgeBracket => p.age_bracket.to_string(),
        Field::HouseholdType => p.household_type.to_string(),
    }
}

/// Fit statistics stored alongside an estimated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error_note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub std_errors: BTreeMap<String, f64>,
    /// Coefficients removed by pruning, in removal order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<String>,
}

impl FitSummary {
    pub fn of(r: &EstimationResult) -> FitSummary {
        FitSummary {
            log_likelihood: r.log_likelihood,
            n_params: r.n_params,
            n_obs: r.n_obs,
            aic: r.aic(),
            converged: r.convergence.converged,
            iterations: r.convergence.iterations,
            gradient_norm: r.convergence.gradient_norm,
            std_error_note: r.std_error_note.clone(),
            std_errors: r.std_errors.clone().unwrap_or_default(),
            removed: Vec::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
}

/// Model file: `[spec]`, `[scaling]` and `[params]` tables, with an optional `[fit]`.
pub fn parse_model(text: &str, source: &str) -> AppResult<(Model, Option<FitSummary>)> {
    let f: ModelFile = toml::from_str(text).map_err(|e| AppError::format(source, e))?;
    Ok((f.model, f.fit))
}

pub fn model_to_toml(model: &Model, fit: Option<&FitSummary>) -> AppResult<String> {
    let f = ModelFile { model: model.clone(), fit: fit.cloned() };
    toml::to_string(&f).map_err(|e| AppError::format("model", e))
}

pub fn parse_spec(text: &str, source: &str) -> AppResult<ModelSpec> {
    toml::from_str(text).map_err(|e| AppError::format(source, e))
}

pub fn spec_to_toml(spec: &ModelSpec) -> AppResult<String> {
    toml::to_string(spec).map_err(|e| AppError::format("spec", e))
}

const CHOICE_KEYS: [&str; 5] = ["respondent_id", "task_id", "alt_index", "cut", "season"];
const DESIGN_KEYS: [&str; 4] = ["block", "task_id", "alt_index", "cut"];

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn header_index(headers: &csv::StringRecord, name: &str, source: &str) -> AppResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| AppError::format(source, format!("missing column `{name}`")))
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize) -> &'a str {
    rec.get(i).unwrap_or("")
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, source: &str, line: u64) -> AppResult<T> {
    s.parse().map_err(|_| AppError::format(source, format!("line {line}: invalid {what} `{s}`")))
}

/// Reads the attribute columns of a record into a product for `cut`.
fn read_product(
    schema: &AttributeSchema,
    cols: &[(usize, usize)],
    rec: &csv::StringRecord,
    cut: &str,
    source: &str,
    line: u64,
) -> AppResult<Product> {
    let mut levels = BTreeMap::new();
    for &(a, i) in cols {
        let attr = &schema.attributes[a];
        let raw = field(rec, i);
        if raw.is_empty() {
            continue;
        }
        let v = if attr.is_categorical() {
            LevelValue::Level(raw.to_string())
        } else {
            LevelValue::Value(parse_num(raw, &attr.name, source, line)?)
        };
        levels.insert(attr.name.clone(), v);
    }
    Ok(Product { cut: cut.to_string(), levels })
}

fn attribute_columns(schema: &AttributeSchema, headers: &csv::StringRecord, source: &str) -> AppResult<Vec<(usize, usize)>> {
    schema.attributes.iter().enumerate().map(|(a, attr)| Ok((a, header_index(headers, &attr.name, source)?))).collect()
}

fn product_cells(schema: &AttributeSchema, p: &Product) -> Vec<String> {
    schema.attributes.iter().map(|a| p.levels.get(&a.name).map(|v| v.to_string()).unwrap_or_default()).collect()
}

/// Parses a respondents file: `respondent_id` plus one column per profile field.
pub fn parse_respondents(text: &str, source: &str) -> AppResult<BTreeMap<u32, RespondentProfile>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(|e| AppError::format(source, e))?.clone();
    let id = header_index(&headers, "respondent_id", source)?;
    let cols: Vec<(Field, usize)> =
        Field::ALL.iter().map(|f| Ok((*f, header_index(&headers, f.as_str(), source)?))).collect::<AppResult<_>>()?;
    let mut out = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| AppError::format(source, e))?;
        let rid: u32 = parse_num(field(&rec, id), "respondent id", source, line)?;
        let mut p = RespondentProfile::default();
        for &(f, i) in &cols {
            let code = f.parse_code(field(&rec, i)).map_err(|e| AppError::format(source, format!("line {line}: {e}")))?;
            p.set(f, code)?;
        }
        if out.insert(rid, p).is_some() {
            return Err(AppError::format(source, format!("line {line}: respondent {rid} listed twice")));
        }
    }
    Ok(out)
}

pub fn write_respondents(respondents: &BTreeMap<u32, RespondentProfile>) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["respondent_id".to_string()];
    header.extend(Field::ALL.iter().map(|f| f.as_str().to_string()));
    w.write_record(&header).map_err(|e| AppError::format("respondents", e))?;
    for (id, p) in respondents {
        let mut rec = vec![id.to_string()];
        rec.extend(Field::ALL.iter().map(|f| profile_value(p, *f)));
        w.write_record(&rec).map_err(|e| AppError::format("respondents", e))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> AppResult<String> {
    let bytes = w.into_inner().map_err(|e| AppError::format("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AppError::format("csv", e))
}

/// Parses a choices file and its respondents file into a validated dataset.
/// `alt_index` counts alternatives from 1.
pub fn parse_dataset(
    schema: &AttributeSchema,
    choices: &str,
    choices_source: &str,
    respondents: &str,
    respondents_source: &str,
) -> AppResult<Dataset> {
    let profiles = parse_respondents(respondents, respondents_source)?;
    let source = choices_source;
    let mut rdr = csv_reader(choices);
    let headers = rdr.headers().map_err(|e| AppError::format(source, e))?.clone();
    let keys: Vec<usize> = CHOICE_KEYS.iter().map(|k| header_index(&headers, k, source)).collect::<AppResult<_>>()?;
    let q = header_index(&headers, "quantity", source)?;
    let cols = attribute_columns(schema, &headers, source)?;
    let mut obs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| AppError::format(source, e))?;
        let respondent: u32 = parse_num(field(&rec, keys[0]), "respondent id", source, line)?;
        let task: u32 = parse_num(field(&rec, keys[1]), "task id", source, line)?;
        let alt: u32 = parse_num(field(&rec, keys[2]), "alternative index", source, line)?;
        if alt == 0 {
            return Err(AppError::format(source, format!("line {line}: alternatives are numbered from 1")));
        }
        let cut = field(&rec, keys[3]);
        let season: Season = field(&rec, keys[4]).parse().map_err(|e| AppError::format(source, format!("line {line}: {e}")))?;
        let product = read_product(schema, &cols, &rec, cut, source, line)?;
        let row = schema.build_row(&product, season).map_err(|e| AppError::format(source, format!("line {line}: {e}")))?;
        let quantity: u8 = parse_num(field(&rec, q), "quantity", source, line)?;
        obs.push(ChoiceObservation { respondent, task, alternative: alt - 1, row, quantity });
    }
    if obs.is_empty() {
        return Err(AppError::format(source, "no observations"));
    }
    let used: BTreeSet<u32> = obs.iter().map(|o| o.respondent).collect();
    let profiles = profiles.into_iter().filter(|(id, _)| used.contains(id)).collect();
    Ok(Dataset::new(schema, obs, profiles)?)
}

pub fn write_choices(schema: &AttributeSchema, data: &Dataset) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = CHOICE_KEYS.iter().map(|s| s.to_string()).collect();
    header.extend(schema.attributes.iter().map(|a| a.name.clone()));
    header.push("quantity".into());
    w.write_record(&header).map_err(|e| AppError::format("choices", e))?;
    for o in data.observations() {
        let p = schema.decode(&o.row)?;
        let mut rec = vec![
            o.respondent.to_string(),
            o.task.to_string(),
            (o.alternative + 1).to_string(),
            o.row.cut.clone(),
            o.row.season.to_string(),
        ];
        rec.extend(product_cells(schema, &p));
        rec.push(o.quantity.to_string());
        w.write_record(&rec).map_err(|e| AppError::format("choices", e))?;
    }
    finish(w)
}

/// Design file: the choices layout with `block` in place of respondent and season, and no quantity.
pub fn write_design(schema: &AttributeSchema, design: &Design) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = DESIGN_KEYS.iter().map(|s| s.to_string()).collect();
    header.extend(schema.attributes.iter().map(|a| a.name.clone()));
    w.write_record(&header).map_err(|e| AppError::format("design", e))?;
    for t in &design.tasks {
        for (a, p) in t.alternatives.iter().enumerate() {
            let mut rec = vec![t.block.to_string(), t.id.to_string(), (a + 1).to_string(), p.cut.clone()];
            rec.extend(product_cells(schema, p));
            w.write_record(&rec).map_err(|e| AppError::format("design", e))?;
        }
    }
    finish(w)
}

pub fn parse_design(schema: &AttributeSchema, text: &str, source: &str, seed: u64) -> AppResult<Design> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(|e| AppError::format(source, e))?.clone();
    let keys: Vec<usize> = DESIGN_KEYS.iter().map(|k| header_index(&headers, k, source)).collect::<AppResult<_>>()?;
    let cols = attribute_columns(schema, &headers, source)?;
    let mut tasks: Vec<ChoiceTask> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| AppError::format(source, e))?;
        let block: u32 = parse_num(field(&rec, keys[0]), "block", source, line)?;
        let id: u32 = parse_num(field(&rec, keys[1]), "task id", source, line)?;
        let alt: usize = parse_num(field(&rec, keys[2]), "alternative index", source, line)?;
        schema.check_cut(field(&rec, keys[3]))?;
        let product = read_product(schema, &cols, &rec, field(&rec, keys[3]), source, line)?;
        match tasks.last_mut() {
            Some(t) if t.id == id => {
                if alt != t.alternatives.len() + 1 || t.block != block {
                    return Err(AppError::format(source, format!("line {line}: alternatives of task {id} out of order")));
                }
                t.alternatives.push(product);
            }
            _ => {
                if alt != 1 || tasks.iter().any(|t| t.id == id) {
                    return Err(AppError::format(source, format!("line {line}: task {id} is not contiguous")));
                }
                tasks.push(ChoiceTask { id, block, alternatives: vec![product] });
            }
        }
    }
    if tasks.is_empty() {
        return Err(AppError::format(source, "no tasks"));
    }
    let blocks = tasks.iter().map(|t| t.block).collect::<BTreeSet<_>>().len();
    Ok(Design { tasks, blocks, seed })
}

/// Formats a number with the shortest representation that parses back to it.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes columns of values as CSV.
pub fn write_csv(header: &[String], rows: &[Vec<String>]) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| AppError::format("csv", e))?;
    for r in rows {
        w.write_record(r).map_err(|e| AppError::format("csv", e))?;
    }
    finish(w)
}
