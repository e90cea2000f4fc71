use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{write_edge_list, zero_hours, HourWeights};
use crate::error::Result;
use crate::ingest::{TractSet, Transition, VenueSet};
use crate::panel::hour_of_week_local;

/// Directed, hour-weighted origin-destination network between distinct tracts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OdNetwork {
    ids: Vec<String>,
    edges: BTreeMap<(usize, usize), HourWeights>,
}

/// Transitions left out of the OD network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdDropReport {
    /// Origin and destination in the same tract; counted as self-loops by the panel.
    pub same_tract: u64,
    /// An endpoint venue lies outside the kept tracts.
    pub unresolved: u64,
}

impl OdNetwork {
    pub fn new(ids: Vec<String>) -> Self {
        OdNetwork {
            ids,
            edges: BTreeMap::new(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Add `weight` transitions from `orig` to `dest` at `hour`.
    pub fn add(&mut self, orig: usize, dest: usize, hour: usize, weight: u64) {
        assert!(orig != dest, "OD edges join distinct tracts");
        assert!(orig < self.ids.len() && dest < self.ids.len(), "node out of range");
        if weight > 0 {
            self.edges.entry((orig, dest)).or_insert_with(zero_hours)[hour] += weight;
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), &HourWeights)> + '_ {
        self.edges.iter().map(|(&k, v)| (k, v))
    }

    pub fn weights(&self, orig: usize, dest: usize) -> Option<&HourWeights> {
        self.edges.get(&(orig, dest))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Total OD weight per hour of week.
    pub fn hourly_totals(&self) -> Vec<u64> {
        let mut out = vec![0; crate::HOURS_PER_WEEK];
        for w in self.edges.values() {
            for (o, x) in out.iter_mut().zip(w.iter()) {
                *o += x;
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_edge_list(self.edges(), &self.ids, out)
    }
}

/// Count transitions between distinct kept tracts at the hour-of-week of their start.
pub fn build_od_network(transitions: &[Transition], venues: &VenueSet, tracts: &TractSet) -> (OdNetwork, OdDropReport) {
    let venue_tract = venues.tract_positions(tracts);
    let mut od = OdNetwork::new(tracts.ids().map(String::from).collect());
    let mut report = OdDropReport::default();
    for t in transitions {
        match (venue_tract[t.src_venue.0 as usize], venue_tract[t.dst_venue.0 as usize]) {
            (Some(k), Some(l)) if k == l => report.same_tract += 1,
            (Some(k), Some(l)) => od.add(k, l, hour_of_week_local(&t.start_ts), 1),
            _ => report.unresolved += 1,
        }
    }
    (od, report)
}
