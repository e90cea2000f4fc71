use crimeflow::panel::{Panel, COVARIATE_COLUMNS};
use crimeflow::pglm::{activity_spec, model_suite, suite_specs, with_extra_regressors, write_aic_table, FitOptions, SuiteReport};
use serde::{Deserialize, Serialize};

use super::features::panel_file;
use super::{rel, require, years_on_disk, EXPLAIN_DIR, FEATURES_DIR};
use crate::args::ExplainArgs;
use crate::error::{CliError, Result};
use crate::fsio::{core_io, Stage};
use crate::Context;

pub const REPORT: &str = "fit_report.json";
pub const AIC_TABLE: &str = "aic_table.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainReport {
    pub year: i32,
    pub activity: bool,
    pub covariates: bool,
    pub options: FitOptions,
    pub n_tracts: usize,
    pub suite: SuiteReport,
}

/// The training year of the forecasting split when two panels exist, else the only one.
pub fn default_year(years: &[i32]) -> Option<i32> {
    match years {
        [] => None,
        [y] => Some(*y),
        [.., y, _] => Some(*y),
    }
}

pub fn run(ctx: &Context, a: &ExplainArgs) -> Result<()> {
    let c = &ctx.config.explain;
    let dir = ctx.out_dir.join(FEATURES_DIR);
    let year = match a.year.or(c.year) {
        Some(y) => y,
        None => default_year(&years_on_disk(&dir, "panel_", ".csv"))
            .ok_or_else(|| CliError::missing("panel", "features build", dir.join("panel_<year>.csv")))?,
    };
    let activity = a.activity().or(c.activity).unwrap_or(false);
    let covariates = a.covariates().or(c.covariates).unwrap_or(false);
    let defaults = FitOptions::default();
    let options = FitOptions {
        tolerance: a.tolerance.or(c.tolerance).unwrap_or(defaults.tolerance),
        max_iter: a.max_iter.or(c.max_iter).unwrap_or(defaults.max_iter),
    };
    if !(options.tolerance > 0.0) || options.max_iter == 0 {
        return Err(CliError::Config("tolerance and max_iter must be positive".into()));
    }
    let settings = serde_json::json!({
        "year": year, "activity": activity, "covariates": covariates, "options": options,
    });
    let mut stage = Stage::new("explain", &ctx.out_dir, ctx.seed, ctx.threads, settings);

    let path = require(dir.join(panel_file(year)), "panel", "features build")?;
    stage.input(&path)?;
    let panel = Panel::read_csv(&path, year)?;
    if activity && !panel.has_activity() {
        return Err(CliError::Config(format!(
            "panel {year} has no activity columns; rerun `features build --activity`"
        )));
    }
    if covariates && !panel.has_covariates() {
        return Err(CliError::Config(format!(
            "panel {year} has no covariate columns; ingest a covariates file first"
        )));
    }
    stage.step("load");

    let mut specs = suite_specs();
    if activity {
        specs.push(activity_spec());
    }
    if covariates {
        specs = with_extra_regressors(specs, &COVARIATE_COLUMNS);
    }
    let suite = model_suite(&panel, &specs, options)?;
    stage.step("fit");

    let report = ExplainReport {
        year,
        activity,
        covariates,
        options,
        n_tracts: panel.n_tracts(),
        suite: SuiteReport::new(&suite),
    };
    stage.write_json(&rel(EXPLAIN_DIR, REPORT), &report)?;
    stage.write(&rel(EXPLAIN_DIR, AIC_TABLE), |w| core_io(write_aic_table(&suite, w)))?;
    stage.finish()?;
    Ok(())
}
