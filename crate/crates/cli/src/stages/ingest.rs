use std::fs;
use std::path::{Path, PathBuf};

use crimeflow::ingest::{
    annual_checkins, assign_venues, derive_transitions, filter_tracts, parse_category_map, parse_checkins,
    parse_crimes, parse_tracts, parse_transitions, parse_venues, write_crimes, write_transitions, write_tracts_geojson,
    write_venues, FilterParams, IngestReport,
};
use crimeflow::panel::parse_covariates;
use log::info;
use serde::{Deserialize, Serialize};

use super::{rel, to_json, transition_years, INGEST_DIR, SYNTH_DATA_DIR};
use crate::args::IngestArgs;
use crate::error::{CliError, Result};
use crate::fsio::{core_io, Stage};
use crate::Context;

pub const TRACTS: &str = "tracts.geojson";
pub const VENUES: &str = "venues.csv";
pub const TRANSITIONS: &str = "transitions.csv";
pub const CRIMES: &str = "crimes.csv";
pub const COVARIATES: &str = "covariates.csv";
pub const REPORT: &str = "ingest_report.json";

/// Resolved input files of the ingest stage.
#[derive(Debug, Clone, Serialize)]
struct Inputs {
    tracts: PathBuf,
    venues: PathBuf,
    category_map: PathBuf,
    transitions: Option<PathBuf>,
    checkins: Option<PathBuf>,
    crimes: PathBuf,
    covariates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub counts: IngestReport,
    pub filter: FilterParams,
    pub filter_year: i32,
    pub timezone: String,
    pub transition_years: Vec<i32>,
    pub kept_tracts: usize,
    pub has_covariates: bool,
}

fn resolve_inputs(ctx: &Context, a: &IngestArgs) -> Result<Inputs> {
    let c = &ctx.config.ingest;
    let data_dir = a.data_dir.clone().or_else(|| c.data_dir.clone()).or_else(|| {
        let synth = ctx.out_dir.join(SYNTH_DATA_DIR);
        synth.is_dir().then(|| {
            info!("no --data-dir given; using {}", synth.display());
            synth
        })
    });
    let pick = |flag: &Option<PathBuf>, conf: &Option<PathBuf>, default: &str| -> Option<PathBuf> {
        flag.clone()
            .or_else(|| conf.clone())
            .or_else(|| data_dir.as_ref().map(|d| d.join(default)))
    };
    let need = |p: Option<PathBuf>, what: &str| -> Result<PathBuf> {
        match p {
            Some(p) if p.is_file() => Ok(p),
            Some(p) => Err(CliError::Config(format!("{what} input {} does not exist", p.display()))),
            None => Err(CliError::Config(format!(
                "no {what} input; pass --data-dir or --{}",
                what.replace(' ', "-")
            ))),
        }
    };
    let explicit_checkins = a.checkins.clone().or_else(|| c.checkins.clone());
    let explicit_transitions = a.transitions.clone().or_else(|| c.transitions.clone());
    let (transitions, checkins) = match (explicit_transitions, explicit_checkins) {
        (Some(t), _) => (Some(need(Some(t), "transitions")?), None),
        (None, Some(ch)) => (None, Some(need(Some(ch), "checkins")?)),
        (None, None) => {
            let t = data_dir.as_ref().map(|d| d.join("transitions.csv"));
            let ch = data_dir.as_ref().map(|d| d.join("checkins.csv"));
            match (t, ch) {
                (Some(t), _) if t.is_file() => (Some(t), None),
                (_, Some(ch)) if ch.is_file() => (None, Some(ch)),
                _ => (Some(need(None, "transitions")?), None),
            }
        }
    };
    let covariates = pick(&a.covariates, &c.covariates, COVARIATES);
    let covariates = match (&a.covariates, &c.covariates, covariates) {
        (None, None, Some(p)) => p.is_file().then_some(p),
        (_, _, p) => Some(need(p, "covariates")?),
    };
    Ok(Inputs {
        tracts: need(pick(&a.tracts, &c.tracts, TRACTS), "tracts")?,
        venues: need(pick(&a.venues, &c.venues, VENUES), "venues")?,
        category_map: need(pick(&a.category_map, &c.category_map, "category_map.csv"), "category map")?,
        transitions,
        checkins,
        crimes: need(pick(&a.crimes, &c.crimes, CRIMES), "crimes")?,
        covariates,
    })
}

pub fn run(ctx: &Context, a: &IngestArgs) -> Result<()> {
    let inputs = resolve_inputs(ctx, a)?;
    let c = &ctx.config.ingest;
    let defaults = FilterParams::default();
    let filter = FilterParams {
        pop_min: a.pop_min.or(c.pop_min).unwrap_or(defaults.pop_min),
        checkin_min: a.checkin_min.or(c.checkin_min).unwrap_or(defaults.checkin_min),
    };
    let settings = serde_json::json!({
        "inputs": to_json(&inputs),
        "filter": to_json(&filter),
        "filter_year": a.filter_year.or(c.filter_year),
        "tz": ctx.tz.to_string(),
    });
    let mut stage = Stage::new("ingest", &ctx.out_dir, ctx.seed, ctx.threads, settings);
    for p in [&inputs.tracts, &inputs.venues, &inputs.category_map, &inputs.crimes] {
        stage.input(p)?;
    }
    for p in [&inputs.transitions, &inputs.checkins, &inputs.covariates].into_iter().flatten() {
        stage.input(p)?;
    }

    let mut report = IngestReport::default();
    let tracts = parse_tracts(&inputs.tracts)?;
    report.tracts_read = tracts.len() as u64;
    let categories = parse_category_map(&inputs.category_map)?;
    let mut venues = parse_venues(&inputs.venues, &categories, &mut report)?;
    report.venues_unassigned = assign_venues(&mut venues, &tracts);
    let transitions = match (&inputs.transitions, &inputs.checkins) {
        (Some(path), _) => parse_transitions(path, &venues, ctx.tz, &mut report)?,
        (None, Some(path)) => {
            let checkins = parse_checkins(path, &venues, ctx.tz, &mut report)?;
            derive_transitions(&checkins)
        }
        (None, None) => unreachable!("resolve_inputs requires one transition source"),
    };
    let crimes = parse_crimes(&inputs.crimes, &[], &tracts, ctx.tz, &mut report)?;
    stage.step("parse");

    let years = transition_years(&transitions);
    let filter_year = match a.filter_year.or(c.filter_year).or_else(|| years.first().copied()) {
        Some(y) => y,
        None => return Err(CliError::Config("no valid transitions; cannot filter tracts".into())),
    };
    let kept = filter_tracts(&tracts, &annual_checkins(&transitions, &venues, Some(filter_year)), filter)?;
    report.tracts_kept = kept.len() as u64;
    info!("kept {} of {} tracts (filter year {filter_year})", kept.len(), tracts.len());
    let covariates = match &inputs.covariates {
        Some(path) => {
            let cov = parse_covariates(path)?;
            cov.for_tracts(&kept)?;
            Some(path)
        }
        None => None,
    };
    stage.step("filter");

    stage.write(&rel(INGEST_DIR, TRACTS), |w| core_io(write_tracts_geojson(&kept, w)))?;
    stage.write(&rel(INGEST_DIR, VENUES), |w| core_io(write_venues(&venues, w)))?;
    stage.write(&rel(INGEST_DIR, TRANSITIONS), |w| core_io(write_transitions(&transitions, &venues, w)))?;
    stage.write(&rel(INGEST_DIR, CRIMES), |w| core_io(write_crimes(&crimes, w)))?;
    let cov_out = stage.path(&rel(INGEST_DIR, COVARIATES));
    match covariates {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            stage.write(&rel(INGEST_DIR, COVARIATES), |w| {
                w.write_all(&bytes).map_err(|e| CliError::io("writing covariates", e))
            })?;
        }
        None => remove_stale(&cov_out)?,
    }
    let summary = IngestSummary {
        counts: report,
        filter,
        filter_year,
        timezone: ctx.tz.to_string(),
        transition_years: years,
        kept_tracts: kept.len(),
        has_covariates: covariates.is_some(),
    };
    stage.write_json(&rel(INGEST_DIR, REPORT), &summary)?;
    stage.step("write");
    stage.finish()?;
    Ok(())
}

/// Remove an output left by an earlier run that this run does not produce.
pub fn remove_stale(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(CliError::io(format!("removing {}", path.display()), e)),
    }
}
