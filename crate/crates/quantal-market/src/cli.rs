//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use quantal_market_core::covariates::{CovariateCoder, Population};
use quantal_market_core::design::{self, DesignOptions, ImproveOptions};
use quantal_market_core::estimate::{fit, prune, FitOptions};
use quantal_market_core::pooling::{pooling_test, preference_plot_data};
use quantal_market_core::schema::{AttributeSchema, Season};
use quantal_market_core::synth::{synthesize, SeasonAssignment, SynthOptions};
use quantal_market_core::wtp::wtp_table;
use quantal_market_core::{Dataset, Model};

use crate::error::{AppError, AppResult};
use crate::io::{self, num, FitSummary, Fixtures};
use crate::simulation::{self, ScenarioRequest};
use crate::tables::{coefficient_table, render_cut_table, restrict, PaperTables};

#[derive(Debug, Parser)]
#[command(name = "quantal-market", version, about = "Quantity-response choice modelling for beef products")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeasonChoice {
    Winter,
    Summer,
    /// Even respondents in winter, odd ones in summer.
    Alternate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a balanced, low-correlation blocked design.
    Design {
        #[arg(long, default_value_t = 200)]
        tasks: usize,
        #[arg(long, default_value_t = 4)]
        alts: usize,
        #[arg(long, default_value_t = 50)]
        blocks: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Swap proposals for the improvement pass; 0 skips it.
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
        /// Schema file; the bundled schema by default.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate respondents answering a design under a model.
    Synth {
        #[arg(long)]
        design: PathBuf,
        /// Model file; the published tables by default.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 946)]
        respondents: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SeasonChoice::Alternate)]
        seasons: SeasonChoice,
        #[arg(long, default_value_t = 1)]
        first_id: u32,
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Choices file to write.
        #[arg(long)]
        out: PathBuf,
        /// Respondents file to write.
        #[arg(long)]
        respondents_out: PathBuf,
    },
    /// Fit a model by maximum likelihood.
    Estimate {
        /// Choices file.
        #[arg(long)]
        data: PathBuf,
        /// Respondents file.
        #[arg(long)]
        respondents: PathBuf,
        /// Specification file.
        #[arg(long)]
        spec: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Remove coefficients that are not significant at `alpha`.
        #[arg(long)]
        prune: bool,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        /// Columns never pruned.
        #[arg(long, value_delimiter = ',', default_value = "price")]
        keep: Vec<String>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Test whether winter and summer samples can be pooled.
    Pooltest {
        /// Winter choices file.
        #[arg(long)]
        winter: PathBuf,
        /// Summer choices file.
        #[arg(long)]
        summer: PathBuf,
        /// Respondents file covering both samples.
        #[arg(long)]
        respondents: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        level: f64,
        /// Report file; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Winter and summer coefficient pairs, as CSV.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Willingness-to-pay table of a model.
    Wtp {
        /// Model file; the published tables by default.
        #[arg(long)]
        params: Option<PathBuf>,
        /// CSV file; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Forecast purchase quantities for a scenario.
    Simulate {
        /// Model file; the published tables by default.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        /// Price grid `lo:hi:step`.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        both_seasons: bool,
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// CSV file; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the schema, forecasts and WTP over HTTP.
    Serve {
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
    },
    /// Write the models reconstructed from the published tables.
    Tables {
        /// Directory for winter.txt, summer.txt, pooled.txt and spec.txt.
        #[arg(long)]
        out: PathBuf,
    },
}

fn schema_from(path: &Option<PathBuf>, fx: &Fixtures) -> AppResult<AttributeSchema> {
    match path {
        Some(p) => io::parse_schema(&io::read_text(p)?, &p.display().to_string()),
        None => fx.schema(),
    }
}

fn population_from(path: &Option<PathBuf>, fx: &Fixtures) -> AppResult<Population> {
    match path {
        Some(p) => io::parse_population(&io::read_text(p)?, &p.display().to_string()),
        None => fx.population(),
    }
}

/// The model in `path`, or the one the published tables describe.
pub fn model_from(path: &Option<PathBuf>, fx: &Fixtures) -> AppResult<Model> {
    match path {
        Some(p) => Ok(io::parse_model(&io::read_text(p)?, &p.display().to_string())?.0),
        None => PaperTables::load(fx)?.pooled_model(),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> AppResult<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_data(schema: &AttributeSchema, choices: &Path, respondents: &Path) -> AppResult<Dataset> {
    io::parse_dataset(
        schema,
        &io::read_text(choices)?,
        &choices.display().to_string(),
        &io::read_text(respondents)?,
        &respondents.display().to_string(),
    )
}

/// Human-readable summary: fit statistics and coefficient tables per season.
pub fn fit_report(schema: &AttributeSchema, model: &Model, fit: &FitSummary, seasons: &[Season]) -> AppResult<String> {
    let mut out = format!(
        "log likelihood\t{}\nparameters\t{}\nobservations\t{}\naic\t{}\nconverged\t{}\niterations\t{}\ngradient norm\t{}\n",
        num(fit.log_likelihood),
        fit.n_params,
        fit.n_obs,
        num(fit.aic),
        fit.converged,
        fit.iterations,
        num(fit.gradient_norm),
    );
    if let Some(n) = &fit.std_error_note {
        out.push_str(&format!("standard errors\t{n}\n"));
    }
    for r in &fit.removed {
        out.push_str(&format!("removed\t{r}\n"));
    }
    for s in seasons {
        out.push('\n');
        out.push_str(&render_cut_table(&coefficient_table(schema, model, *s)?, &format!("{s} coefficients")));
    }
    Ok(out)
}

/// WTP table with one row per season, attribute and level and one column per cut.
pub fn wtp_csv(schema: &AttributeSchema, model: &Model) -> AppResult<String> {
    let table = wtp_table(schema, model)?;
    let mut header = vec!["season".to_string(), "attribute".to_string(), "level".to_string()];
    header.extend(schema.cuts.iter().cloned());
    let mut rows = Vec::new();
    for season in Season::ALL {
        let cells: Vec<_> = schema.cuts.iter().map(|c| quantal_market_core::Cell::new(c.clone(), season)).collect();
        if !cells.iter().any(|c| model.has_cell(c)) {
            continue;
        }
        let first: Vec<_> = table.entries.iter().filter(|e| e.cell.season == season).collect();
        let mut keys: Vec<(String, String)> = Vec::new();
        for e in first {
            let k = (e.attribute.clone(), e.level.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (attr, level) in keys {
            let mut row = vec![season.to_string(), attr.clone(), level.clone()];
            for c in &cells {
                row.push(match table.get(c, &attr, &level).and_then(|e| e.value) {
                    Some(v) => num(v),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
    }
    io::write_csv(&header, &rows)
}

pub fn execute(cmd: Command, fx: &Fixtures) -> AppResult<()> {
    match cmd {
        Command::Design { tasks, alts, blocks, seed, max_iters, schema, out } => {
            let schema = schema_from(&schema, fx)?;
            let d = design::generate(&schema, &DesignOptions { tasks, alternatives: alts, blocks, seed })?;
            let d = design::improve(&schema, &d, &ImproveOptions { max_iters, ..Default::default() })?;
            let diag = design::diagnostics(&schema, &d)?;
            io::write_text(&out, &io::write_design(&schema, &d)?)?;
            eprintln!(
                "{} tasks in {} blocks; max level spread {}; max |r| {}",
                d.tasks.len(),
                d.blocks,
                diag.max_spread,
                num(diag.max_abs_correlation)
            );
        }
        Command::Synth { design, params, respondents, seed, seasons, first_id, population, schema, out, respondents_out } => {
            let schema = schema_from(&schema, fx)?;
            let model = model_from(&params, fx)?;
            let pop = population_from(&population, fx)?;
            let d = io::parse_design(&schema, &io::read_text(&design)?, &design.display().to_string(), seed)?;
            let seasons = match seasons {
                SeasonChoice::Winter => SeasonAssignment::All(Season::Winter),
                SeasonChoice::Summer => SeasonAssignment::All(Season::Summer),
                SeasonChoice::Alternate => SeasonAssignment::Alternate,
            };
            let data = synthesize(&schema, &model, &d, &pop, &SynthOptions { respondents, seed, seasons, first_id })?;
            io::write_text(&out, &io::write_choices(&schema, &data)?)?;
            io::write_text(&respondents_out, &io::write_respondents(data.respondents())?)?;
        }
        Command::Estimate { data, respondents, spec, out, prune: do_prune, alpha, keep, schema } => {
            let schema = schema_from(&schema, fx)?;
            let data = load_data(&schema, &data, &respondents)?;
            let spec = io::parse_spec(&io::read_text(&spec)?, &spec.display().to_string())?;
            let opts = FitOptions::default();
            let (result, removed) = if do_prune {
                let o = prune(&schema, &data, &spec, &opts, alpha, &keep)?;
                (o.result, o.removed.into_iter().map(|s| s.parameter).collect())
            } else {
                (fit(&schema, &data, &spec, &opts)?, Vec::new())
            };
            let mut summary = FitSummary::of(&result);
            summary.removed = removed;
            io::write_text(&out, &io::model_to_toml(&result.model, Some(&summary))?)?;
            let seasons: Vec<Season> = data.seasons().into_iter().collect();
            print!("{}", fit_report(&schema, &result.model, &summary, &seasons)?);
            if !result.convergence.converged {
                return Err(quantal_market_core::Error::Numerical(format!(
                    "no convergence after {} iterations; best point written",
                    result.convergence.iterations
                ))
                .into());
            }
        }
        Command::Pooltest { winter, summer, respondents, spec, level, out, pairs, schema } => {
            let schema = schema_from(&schema, fx)?;
            let w = load_data(&schema, &winter, &respondents)?;
            let s = load_data(&schema, &summer, &respondents)?;
            let spec = io::parse_spec(&io::read_text(&spec)?, &spec.display().to_string())?;
            let opts = FitOptions { coder: Some(CovariateCoder::fit(w.respondents().values().chain(s.respondents().values()))?), ..FitOptions::default() };
            let (r, fits) = pooling_test(&schema, &w, &s, &spec, level, &opts)?;
            let text = format!(
                "ll_winter = {}\nll_summer = {}\nll_pooled = {}\nk_winter = {}\nk_summer = {}\nk_pooled = {}\nstatistic = {}\ndf = {}\np_value = {}\nlevel = {}\nreject = {}\n",
                num(r.ll_winter),
                num(r.ll_summer),
                num(r.ll_pooled),
                r.k_winter,
                r.k_summer,
                r.k_pooled,
                num(r.statistic),
                r.df,
                num(r.p_value),
                num(r.level),
                r.reject
            );
            emit(&out, &text)?;
            if let Some(p) = pairs {
                let plot = preference_plot_data(&schema, &fits.winter.model, &fits.summer.model)?;
                let rows: Vec<Vec<String>> =
                    plot.points.iter().map(|q| vec![q.column.clone(), q.cut.clone(), num(q.winter), num(q.summer)]).collect();
                let mut text = io::write_csv(&["column", "cut", "winter", "summer"].map(String::from), &rows)?;
                text.push_str(&format!("# slope {}\n", num(plot.slope)));
                io::write_text(&p, &text)?;
            }
        }
        Command::Wtp { params, out, schema } => {
            let schema = schema_from(&schema, fx)?;
            let model = model_from(&params, fx)?;
            emit(&out, &wtp_csv(&schema, &model)?)?;
        }
        Command::Simulate { params, scenario, sweep, both_seasons, population, schema, out } => {
            let schema = schema_from(&schema, fx)?;
            let model = model_from(&params, fx)?;
            let pop = population_from(&population, fx)?;
            let mut req: ScenarioRequest =
                toml::from_str(&io::read_text(&scenario)?).map_err(|e| AppError::format(scenario.display().to_string(), e))?;
            if sweep.is_some() {
                req.sweep = sweep;
                req.prices = None;
            }
            req.both_seasons |= both_seasons;
            let result = simulation::run(&schema, &model, &pop, &req)?;
            emit(&out, &io::write_csv(&simulation::csv_header(), &simulation::csv_rows(&result))?)?;
        }
        Command::Serve { schema, params, population, listen } => {
            let schema = schema_from(&schema, fx)?;
            let model = model_from(&params, fx)?;
            let pop = population_from(&population, fx)?;
            let state = crate::service::AppState::new(schema, model, pop)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Io { path: listen.clone(), source: e })?;
            rt.block_on(crate::service::serve(state, &listen))?;
        }
        Command::Tables { out } => {
            let tables = PaperTables::load(fx)?;
            let pooled = tables.pooled_model()?;
            let schema = &tables.schema;
            std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
            for (name, m) in [
                ("winter.txt", restrict(schema, &pooled, Season::Winter)),
                ("summer.txt", restrict(schema, &pooled, Season::Summer)),
                ("pooled.txt", pooled.clone()),
            ] {
                io::write_text(&out.join(name), &io::model_to_toml(&m, None)?)?;
            }
            io::write_text(&out.join("spec.txt"), &io::spec_to_toml(&pooled.spec)?)?;
        }
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, &Fixtures::from_env()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
