use std::collections::BTreeMap;

use crimeflow::flownet::PassThroughCounts;
use crimeflow::ingest::{read_crimes, CrimeType};
use crimeflow::panel::{build_panel, parse_covariates, PanelOptions, PanelReport, Provenance};
use log::warn;
use serde::{Deserialize, Serialize};

use super::ingest::{IngestSummary, COVARIATES, CRIMES, REPORT as INGEST_REPORT};
use super::network::{load_ingest, passthrough_file};
use super::{prune_years, rel, require, transition_years, FEATURES_DIR, INGEST_DIR, NETWORK_DIR};
use crate::args::FeaturesArgs;
use crate::error::{CliError, Result};
use crate::fsio::{core_io, read_json, Stage};
use crate::Context;

pub const REPORT: &str = "features_report.json";

pub fn panel_file(year: i32) -> String {
    format!("panel_{year}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesReport {
    pub crime_types: Vec<CrimeType>,
    pub activity: bool,
    pub covariates: bool,
    pub n_tracts: usize,
    pub provenance: Provenance,
    pub years: BTreeMap<i32, PanelReport>,
}

pub fn parse_crime_types(names: &[String]) -> Result<Vec<CrimeType>> {
    names
        .iter()
        .map(|n| {
            CrimeType::parse(n).ok_or_else(|| {
                let known: Vec<&str> = CrimeType::ALL.iter().map(|c| c.as_str()).collect();
                CliError::Config(format!("unknown crime type {n:?}; expected one of {}", known.join(", ")))
            })
        })
        .collect()
}

pub fn run(ctx: &Context, a: &FeaturesArgs) -> Result<()> {
    let c = &ctx.config.features;
    let crime_types = parse_crime_types(a.crime_types.as_ref().or(c.crime_types.as_ref()).map_or(&[][..], |v| v))?;
    let activity = a.activity().or(c.activity).unwrap_or(true);
    let settings = serde_json::json!({ "crime_types": crime_types, "activity": activity });
    let mut stage = Stage::new("features build", &ctx.out_dir, ctx.seed, ctx.threads, settings);

    let (tracts, venues, transitions) = load_ingest(ctx, &mut stage)?;
    let ingest_dir = ctx.out_dir.join(INGEST_DIR);
    let crimes_path = require(ingest_dir.join(CRIMES), "ingested crimes", "ingest")?;
    let report_path = require(ingest_dir.join(INGEST_REPORT), "ingest report", "ingest")?;
    stage.input(&crimes_path)?;
    let crimes = read_crimes(&crimes_path)?;
    let summary: IngestSummary = read_json(&report_path)?;
    let cov_path = ingest_dir.join(COVARIATES);
    let covariates = if cov_path.is_file() {
        stage.input(&cov_path)?;
        Some(parse_covariates(&cov_path)?)
    } else {
        None
    };

    let years = transition_years(&transitions);
    let ids: Vec<String> = tracts.ids().map(String::from).collect();
    let mut passthrough = BTreeMap::new();
    for &year in &years {
        let path = require(
            ctx.out_dir.join(NETWORK_DIR).join(passthrough_file(year)),
            "pass-through counts",
            "network build",
        )?;
        stage.input(&path)?;
        passthrough.insert(year, PassThroughCounts::read_csv(&path, ids.clone())?);
    }
    stage.step("load");

    let options = PanelOptions {
        crime_types: crime_types.clone(),
        include_activity: activity,
    };
    let provenance = Provenance {
        input_digests: stage.input_digests().clone(),
        filter: Some(summary.filter),
        crime_types: crime_types.iter().map(|c| c.as_str().to_string()).collect(),
    };
    let mut report = FeaturesReport {
        crime_types: crime_types.clone(),
        activity,
        covariates: covariates.is_some(),
        n_tracts: tracts.len(),
        provenance: provenance.clone(),
        years: BTreeMap::new(),
    };
    for &year in &years {
        let (panel, panel_report) = build_panel(
            year,
            &tracts,
            &venues,
            &transitions,
            &crimes,
            &passthrough[&year],
            covariates.as_ref(),
            &options,
            provenance.clone(),
        )?;
        if panel.rows().iter().all(|r| r.past_crime == 0) {
            warn!("{year}: no crime recorded in {}; past_crime is zero everywhere", year - 1);
        }
        stage.write(&rel(FEATURES_DIR, &panel_file(year)), |w| core_io(panel.write_csv(w)))?;
        report.years.insert(year, panel_report);
        stage.step(&format!("panel {year}"));
    }
    prune_years(&ctx.out_dir.join(FEATURES_DIR), "panel_", ".csv", &years)?;
    stage.write_json(&rel(FEATURES_DIR, REPORT), &report)?;
    stage.finish()?;
    Ok(())
}
