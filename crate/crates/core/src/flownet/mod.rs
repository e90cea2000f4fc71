//! Spatial adjacency, origin-destination and shortest-path networks over tracts.
//!
//! Nodes are positions in a [`TractSet`](crate::ingest::TractSet), which is sorted by
//! `tract_id`, so comparing node indices is the same as comparing tract ids.
//! Per-edge weights are 168-slot vectors indexed by hour-of-week.

mod adjacency;
mod od;
mod routing;

pub use adjacency::{build_queen_adjacency, load_custom_adjacency, AdjacencyNetwork};
pub use od::{build_od_network, OdDropReport, OdNetwork};
pub use routing::{
    build_shortest_path_network, pass_through_counts, route_od_pairs, shortest_path, FlowNetworks, PassThroughCounts,
    Routes, RoutingReport, ShortestPathNetwork,
};

use std::io::Write;

use crate::error::{Error, Result};
use crate::HOURS_PER_WEEK;

/// Per-hour-of-week weights of one directed edge.
pub type HourWeights = Box<[u64; HOURS_PER_WEEK]>;

pub(crate) fn zero_hours() -> HourWeights {
    Box::new([0; HOURS_PER_WEEK])
}

/// Write `src,dst,hour,weight` rows for every non-zero slot.
pub(crate) fn write_edge_list<'a, W: Write>(
    edges: impl Iterator<Item = ((usize, usize), &'a HourWeights)>,
    ids: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("writing edge list", e);
    w.write_record(["src", "dst", "hour", "weight"]).map_err(err)?;
    for ((s, d), weights) in edges {
        for (hour, &wt) in weights.iter().enumerate() {
            if wt > 0 {
                w.write_record([ids[s].as_str(), ids[d].as_str(), &hour.to_string(), &wt.to_string()])
                    .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing edge list", e))
}

/// One `src,dst,hour,weight` row of an edge list.
#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize)]
pub struct EdgeRow {
    pub src: String,
    pub dst: String,
    pub hour: usize,
    pub weight: u64,
}

/// Read an edge list written by the network `write_csv` methods.
pub fn read_edge_list(path: &std::path::Path) -> Result<Vec<EdgeRow>> {
    let mut out = Vec::new();
    crate::ingest::for_each_csv_row(path, &["src", "dst", "hour", "weight"], |line, row: EdgeRow| {
        if row.hour >= HOURS_PER_WEEK {
            return Err(Error::parse(path, line, format!("hour {} outside 0..168", row.hour)));
        }
        out.push(row);
        Ok(())
    })?;
    Ok(out)
}
