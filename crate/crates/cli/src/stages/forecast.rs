use crimeflow::forecast::{prediction_suite, write_eval_table, EvalReport, ForecastConfig, RfGrid, Variant};
use crimeflow::panel::Panel;

use super::features::panel_file;
use super::{rel, require, years_on_disk, FEATURES_DIR, FORECAST_DIR};
use crate::args::ForecastArgs;
use crate::error::{CliError, Result};
use crate::fsio::{core_io, Stage};
use crate::Context;

pub const REPORT: &str = "report.json";
pub const TABLE: &str = "table.csv";

pub fn parse_grid(name: &str) -> Result<RfGrid> {
    match name {
        "full" => Ok(RfGrid::default()),
        "desk" => Ok(RfGrid::desk()),
        other => Err(CliError::Config(format!("unknown grid {other:?}; expected full or desk"))),
    }
}

pub fn run(ctx: &Context, a: &ForecastArgs) -> Result<()> {
    let c = &ctx.config.forecast;
    let dir = ctx.out_dir.join(FEATURES_DIR);
    let on_disk = years_on_disk(&dir, "panel_", ".csv");
    let eval_year = match a.eval_year.or(c.eval_year) {
        Some(y) => y,
        None => *on_disk
            .last()
            .ok_or_else(|| CliError::missing("panel", "features build", dir.join("panel_<year>.csv")))?,
    };
    let train_year = a.train_year.or(c.train_year).unwrap_or(eval_year - 1);
    if train_year == eval_year {
        return Err(CliError::Config("training and evaluation years must differ".into()));
    }

    let defaults = ForecastConfig::default();
    let variants = match a.variants.as_ref().or(c.variants.as_ref()) {
        Some(names) => names.iter().map(|n| n.trim().parse::<Variant>()).collect::<crimeflow::Result<Vec<_>>>()?,
        None => defaults.variants.clone(),
    };
    let grid = a.grid.as_deref().or(c.grid.as_deref()).unwrap_or("full");
    let cfg = ForecastConfig {
        seed: ctx.seed,
        folds: a.folds.or(c.folds).unwrap_or(defaults.folds),
        variants,
        random_forest: !a.no_random_forest && c.random_forest.unwrap_or(true),
        elastic_net: !a.no_elastic_net && c.elastic_net.unwrap_or(true),
        covariates: a.covariates().or(c.covariates).unwrap_or(false),
        en_grid: defaults.en_grid.clone(),
        rf_grid: parse_grid(grid)?,
    };
    let settings = serde_json::json!({
        "train_year": train_year, "eval_year": eval_year, "grid": grid, "forecast": cfg,
    });
    let mut stage = Stage::new("forecast", &ctx.out_dir, ctx.seed, ctx.threads, settings);

    let mut load = |year: i32| -> Result<Panel> {
        let path = require(dir.join(panel_file(year)), "panel", "features build")?;
        stage.input(&path)?;
        Ok(Panel::read_csv(&path, year)?)
    };
    let train = load(train_year)?;
    let eval = load(eval_year)?;
    stage.step("load");

    let report: EvalReport = prediction_suite(&train, &eval, &cfg)?;
    stage.step("train and evaluate");
    stage.write_json(&rel(FORECAST_DIR, REPORT), &report)?;
    stage.write(&rel(FORECAST_DIR, TABLE), |w| core_io(write_eval_table(&report, w)))?;
    stage.finish()?;
    Ok(())
}
