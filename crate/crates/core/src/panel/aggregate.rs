use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::hour_of_week_local;
use crate::ingest::{CrimeSet, CrimeType, TractSet, Transition, VenueSet};
use crate::HOURS_PER_WEEK;

/// Dense `tract × hour-of-week` count grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TractHourCounts {
    tracts: usize,
    data: Vec<u64>,
}

impl TractHourCounts {
    pub fn zeros(tracts: usize) -> Self {
        TractHourCounts {
            tracts,
            data: vec![0; tracts * HOURS_PER_WEEK],
        }
    }

    pub fn tracts(&self) -> usize {
        self.tracts
    }

    pub fn get(&self, tract: usize, hour: usize) -> u64 {
        self.data[tract * HOURS_PER_WEEK + hour]
    }

    pub fn add(&mut self, tract: usize, hour: usize, n: u64) {
        self.data[tract * HOURS_PER_WEEK + hour] += n;
    }

    pub fn row(&self, tract: usize) -> &[u64] {
        &self.data[tract * HOURS_PER_WEEK..(tract + 1) * HOURS_PER_WEEK]
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }
}

/// Transition endpoints that could not be placed in a kept tract.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointDrops {
    pub transitions: u64,
    pub dropped_endpoints: u64,
    /// Both endpoints resolved, distinct tracts.
    pub cross_tract: u64,
    /// Both endpoints resolved, same tract.
    pub same_tract: u64,
    /// At least one endpoint unresolved.
    pub partial: u64,
}

/// Check-in, flow and activity counts of one set of transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityCounts {
    pub checkins: TractHourCounts,
    pub inout: TractHourCounts,
    pub selfloop: TractHourCounts,
    /// Check-ins split by the venue's activity type, indexed by [`ActivityType::index`].
    pub activity: [TractHourCounts; 5],
    pub drops: EndpointDrops,
}

/// Every transition gives two check-ins: at the source tract at its start hour and at the
/// destination tract at its end hour. Endpoints outside the kept tracts are skipped.
pub fn aggregate_checkins(transitions: &[Transition], venues: &VenueSet, tracts: &TractSet) -> (TractHourCounts, EndpointDrops) {
    let m = mobility_counts(transitions, venues, tracts);
    (m.checkins, m.drops)
}

/// Incoming/outgoing and self-loop flows.
///
/// A transition between distinct tracts adds one to `inout` at the origin (start hour) and one at
/// the destination (end hour). A transition within one tract adds one to `selfloop` at its start hour.
pub fn decompose_flows(
    transitions: &[Transition],
    venues: &VenueSet,
    tracts: &TractSet,
) -> (TractHourCounts, TractHourCounts) {
    let m = mobility_counts(transitions, venues, tracts);
    (m.inout, m.selfloop)
}

/// All transition-derived counts in one pass.
pub fn mobility_counts(transitions: &[Transition], venues: &VenueSet, tracts: &TractSet) -> MobilityCounts {
    let n = tracts.len();
    let venue_tract = venues.tract_positions(tracts);
    let mut out = MobilityCounts {
        checkins: TractHourCounts::zeros(n),
        inout: TractHourCounts::zeros(n),
        selfloop: TractHourCounts::zeros(n),
        activity: std::array::from_fn(|_| TractHourCounts::zeros(n)),
        drops: EndpointDrops::default(),
    };
    for t in transitions {
        out.drops.transitions += 1;
        let src = venue_tract[t.src_venue.0 as usize];
        let dst = venue_tract[t.dst_venue.0 as usize];
        let (h_start, h_end) = (hour_of_week_local(&t.start_ts), hour_of_week_local(&t.end_ts));
        for (tract, hour, venue) in [(src, h_start, t.src_venue), (dst, h_end, t.dst_venue)] {
            match tract {
                Some(i) => {
                    out.checkins.add(i, hour, 1);
                    out.activity[venues.get(venue).activity_type.index()].add(i, hour, 1);
                }
                None => out.drops.dropped_endpoints += 1,
            }
        }
        match (src, dst) {
            (Some(k), Some(l)) if k == l => {
                out.drops.same_tract += 1;
                out.selfloop.add(k, h_start, 1);
            }
            _ => {
                if src.is_some() && dst.is_some() {
                    out.drops.cross_tract += 1;
                } else {
                    out.drops.partial += 1;
                }
                if let Some(k) = src {
                    out.inout.add(k, h_start, 1);
                }
                if let Some(l) = dst {
                    out.inout.add(l, h_end, 1);
                }
            }
        }
    }
    out
}

/// Incidents per kept tract and hour-of-week during `year`. `types` empty means all five.
/// Returns the grid and the number of in-year incidents outside the kept tracts.
pub fn aggregate_crime(crimes: &CrimeSet, tracts: &TractSet, year: i32, types: &[CrimeType]) -> (TractHourCounts, u64) {
    let mut grid = TractHourCounts::zeros(tracts.len());
    let mut dropped = 0;
    for c in crimes {
        if c.ts.year() != year || !(types.is_empty() || types.contains(&c.crime_type)) {
            continue;
        }
        match c.tract_id.as_deref().and_then(|id| tracts.position(id)) {
            Some(i) => grid.add(i, hour_of_week_local(&c.ts), 1),
            None => dropped += 1,
        }
    }
    (grid, dropped)
}

/// Transitions whose start falls in `year`.
pub fn transitions_in_year(transitions: &[Transition], year: i32) -> Vec<Transition> {
    transitions.iter().filter(|t| t.start_ts.year() == year).cloned().collect()
}

pub const ACTIVITY_COLUMNS: [&str; 5] = [
    "checkins_work_study",
    "checkins_restaurants_bars",
    "checkins_leisure",
    "checkins_shopping",
    "checkins_travel",
];
