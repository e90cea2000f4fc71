use std::collections::BTreeMap;

use chrono::Datelike;
use crimeflow::flownet::{build_od_network, build_queen_adjacency, load_custom_adjacency, FlowNetworks, OdDropReport, RoutingReport};
use crimeflow::ingest::{parse_tracts, parse_transitions, read_venues, TractSet, TransitionSet, VenueSet};
use log::info;
use serde::{Deserialize, Serialize};

use super::{ingest, prune_years, rel, require, to_json, transition_years, INGEST_DIR, NETWORK_DIR};
use crate::args::NetworkArgs;
use crate::error::Result;
use crate::fsio::{core_io, Stage};
use crate::Context;

pub const ADJACENCY: &str = "adjacency.csv";
pub const REPORT: &str = "network_report.json";

pub fn od_file(year: i32) -> String {
    format!("od_edges_{year}.csv")
}

pub fn sp_file(year: i32) -> String {
    format!("sp_edges_{year}.csv")
}

pub fn passthrough_file(year: i32) -> String {
    format!("passthrough_{year}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearNetworkReport {
    pub transitions: usize,
    pub routing: RoutingReport,
    pub dropped: OdDropReport,
    pub passthrough_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub nodes: usize,
    pub adjacency_edges: usize,
    pub custom_adjacency: bool,
    pub years: BTreeMap<i32, YearNetworkReport>,
}

/// Kept tracts, assigned venues and transitions written by `ingest`.
pub fn load_ingest(ctx: &Context, stage: &mut Stage) -> Result<(TractSet, VenueSet, TransitionSet)> {
    let dir = ctx.out_dir.join(INGEST_DIR);
    let tracts_path = require(dir.join(ingest::TRACTS), "ingested tracts", "ingest")?;
    let venues_path = require(dir.join(ingest::VENUES), "ingested venues", "ingest")?;
    let trs_path = require(dir.join(ingest::TRANSITIONS), "ingested transitions", "ingest")?;
    for p in [&tracts_path, &venues_path, &trs_path] {
        stage.input(p)?;
    }
    let tracts = parse_tracts(&tracts_path)?;
    let venues = read_venues(&venues_path)?;
    let mut scratch = Default::default();
    let transitions = parse_transitions(&trs_path, &venues, ctx.tz, &mut scratch)?;
    Ok((tracts, venues, transitions))
}

pub fn run(ctx: &Context, a: &NetworkArgs) -> Result<()> {
    let custom = a.adjacency.clone().or_else(|| ctx.config.network.adjacency.clone());
    let settings = serde_json::json!({ "adjacency": to_json(&custom) });
    let mut stage = Stage::new("network build", &ctx.out_dir, ctx.seed, ctx.threads, settings);
    let (tracts, venues, transitions) = load_ingest(ctx, &mut stage)?;
    stage.step("load");

    let adjacency = match &custom {
        Some(path) => {
            stage.input(path)?;
            load_custom_adjacency(path, &tracts)?
        }
        None => build_queen_adjacency(&tracts)?,
    };
    stage.write(&rel(NETWORK_DIR, ADJACENCY), |w| core_io(adjacency.write_csv(w)))?;
    stage.step("adjacency");

    let mut report = NetworkReport {
        nodes: adjacency.len(),
        adjacency_edges: adjacency.edge_count(),
        custom_adjacency: custom.is_some(),
        years: BTreeMap::new(),
    };
    for year in transition_years(&transitions) {
        let in_year: TransitionSet = transitions.iter().filter(|t| t.start_ts.year() == year).cloned().collect();
        let (od, dropped) = build_od_network(&in_year, &venues, &tracts);
        let nets = FlowNetworks::build(adjacency.clone(), od);
        info!(
            "{year}: {} OD edges, {} paths, {} searches",
            nets.report.od_edges, nets.report.paths_computed, nets.report.bfs_runs
        );
        stage.write(&rel(NETWORK_DIR, &od_file(year)), |w| core_io(nets.od.write_csv(w)))?;
        stage.write(&rel(NETWORK_DIR, &sp_file(year)), |w| core_io(nets.shortest_path.write_csv(w)))?;
        stage.write(&rel(NETWORK_DIR, &passthrough_file(year)), |w| core_io(nets.pass_through.write_csv(w)))?;
        report.years.insert(
            year,
            YearNetworkReport {
                transitions: in_year.len(),
                routing: nets.report,
                dropped,
                passthrough_total: nets.pass_through.total(),
            },
        );
        stage.step(&format!("routing {year}"));
    }
    let years: Vec<i32> = report.years.keys().copied().collect();
    let dir = ctx.out_dir.join(NETWORK_DIR);
    for (prefix, suffix) in [("od_edges_", ".csv"), ("sp_edges_", ".csv"), ("passthrough_", ".csv")] {
        prune_years(&dir, prefix, suffix, &years)?;
    }
    stage.write_json(&rel(NETWORK_DIR, REPORT), &report)?;
    stage.finish()?;
    Ok(())
}
