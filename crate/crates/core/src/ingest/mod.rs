//! Input parsing, point-to-tract assignment, transition derivation and tract filtering.

mod crimes;
mod csvio;
pub(crate) use csvio::{for_each_row as for_each_csv_row, open as open_csv, writer as csv_writer};
mod filter;
mod timestamp;
mod tracts;
mod transitions;
mod venues;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

pub use crimes::{parse_crimes, read_crimes, write_crimes};
pub use filter::{annual_checkins, filter_tracts, FilterParams};
pub use timestamp::{format_timestamp, parse_timestamp, Timezone};
pub use tracts::{assign_point_to_tract, parse_tracts, write_tracts_geojson, TractLocator};
pub use transitions::{
    derive_transitions, parse_checkins, parse_transitions, write_transitions, CheckIn,
    MAX_TRANSITION_SECONDS,
};
pub use venues::{assign_venues, parse_category_map, parse_venues, read_venues, write_venues, CategoryMap};

#[derive(Debug, Clone, PartialEq)]
pub struct Tract {
    pub tract_id: String,
    pub polygon: Polygon,
    pub centroid: Point,
    pub population: u64,
}

/// Tracts sorted by `tract_id`; positions double as node indices in every network.
#[derive(Debug, Clone, Default)]
pub struct TractSet {
    tracts: Vec<Tract>,
    index: HashMap<String, usize>,
}

impl TractSet {
    pub fn new(mut tracts: Vec<Tract>) -> Result<Self> {
        tracts.sort_by(|a, b| a.tract_id.cmp(&b.tract_id));
        let mut index = HashMap::with_capacity(tracts.len());
        for (i, t) in tracts.iter().enumerate() {
            if index.insert(t.tract_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate tract_id {:?}", t.tract_id)));
            }
        }
        Ok(TractSet { tracts, index })
    }

    pub fn len(&self) -> usize {
        self.tracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracts.is_empty()
    }

    pub fn tracts(&self) -> &[Tract] {
        &self.tracts
    }

    pub fn get(&self, idx: usize) -> &Tract {
        &self.tracts[idx]
    }

    pub fn position(&self, tract_id: &str) -> Option<usize> {
        self.index.get(tract_id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.tracts.iter().map(|t| t.tract_id.as_str())
    }

    /// Subset with the given ids kept, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Tract) -> bool) -> TractSet {
        let tracts: Vec<Tract> = self.tracts.iter().filter(|t| keep(t)).cloned().collect();
        TractSet::new(tracts).expect("subset of a valid set has unique ids")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityType {
    WorkStudy,
    RestaurantsBars,
    Leisure,
    Shopping,
    Travel,
}

impl ActivityType {
    pub const ALL: [ActivityType; 5] = [
        ActivityType::WorkStudy,
        ActivityType::RestaurantsBars,
        ActivityType::Leisure,
        ActivityType::Shopping,
        ActivityType::Travel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityType::WorkStudy => "work_study",
            ActivityType::RestaurantsBars => "restaurants_bars",
            ActivityType::Leisure => "leisure",
            ActivityType::Shopping => "shopping",
            ActivityType::Travel => "travel",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lowercase and fold separators so "Larceny/Theft" and "larceny_theft" compare equal.
pub(crate) fn normalize_label(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == '/' || c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

impl FromStr for ActivityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = normalize_label(s);
        ActivityType::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::Validation(format!("unknown activity type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Venue {
    pub venue_id: String,
    pub location: Point,
    pub category: String,
    pub activity_type: ActivityType,
    pub tract_id: Option<String>,
}

/// Position of a venue inside its [`VenueSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VenueIdx(pub u32);

#[derive(Debug, Clone, Default)]
pub struct VenueSet {
    venues: Vec<Venue>,
    index: HashMap<String, VenueIdx>,
}

impl VenueSet {
    pub fn new(venues: Vec<Venue>) -> Result<Self> {
        let mut index = HashMap::with_capacity(venues.len());
        for (i, v) in venues.iter().enumerate() {
            if index.insert(v.venue_id.clone(), VenueIdx(i as u32)).is_some() {
                return Err(Error::Validation(format!("duplicate venue_id {:?}", v.venue_id)));
            }
        }
        Ok(VenueSet { venues, index })
    }

    pub fn len(&self) -> usize {
        self.venues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.venues.is_empty()
    }

    pub fn venues(&self) -> &[Venue] {
        &self.venues
    }

    pub fn get(&self, idx: VenueIdx) -> &Venue {
        &self.venues[idx.0 as usize]
    }

    pub fn lookup(&self, venue_id: &str) -> Option<VenueIdx> {
        self.index.get(venue_id).copied()
    }

    pub(crate) fn venues_mut(&mut self) -> &mut [Venue] {
        &mut self.venues
    }

    /// For each venue, its position in `tracts` (None when unassigned or the tract was filtered out).
    pub fn tract_positions(&self, tracts: &TractSet) -> Vec<Option<usize>> {
        self.venues
            .iter()
            .map(|v| v.tract_id.as_deref().and_then(|id| tracts.position(id)))
            .collect()
    }
}

/// One movement between two venues by the same user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub user_key: String,
    /// Local wall-clock time in the dataset timezone.
    pub start_ts: NaiveDateTime,
    pub end_ts: NaiveDateTime,
    pub src_venue: VenueIdx,
    pub dst_venue: VenueIdx,
}

impl Transition {
    /// Distinct venues, ordered timestamps, at most three hours apart.
    pub fn is_valid(&self) -> bool {
        self.src_venue != self.dst_venue
            && self.start_ts <= self.end_ts
            && (self.end_ts - self.start_ts).num_seconds() <= MAX_TRANSITION_SECONDS
    }
}

pub type TransitionSet = Vec<Transition>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeType {
    LarcenyTheft,
    Robbery,
    Assault,
    Burglary,
    VehicleTheft,
}

impl CrimeType {
    pub const ALL: [CrimeType; 5] = [
        CrimeType::LarcenyTheft,
        CrimeType::Robbery,
        CrimeType::Assault,
        CrimeType::Burglary,
        CrimeType::VehicleTheft,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CrimeType::LarcenyTheft => "larceny_theft",
            CrimeType::Robbery => "robbery",
            CrimeType::Assault => "assault",
            CrimeType::Burglary => "burglary",
            CrimeType::VehicleTheft => "vehicle_theft",
        }
    }

    /// Parse a felony label; `None` for any type outside the five.
    pub fn parse(s: &str) -> Option<CrimeType> {
        let norm = normalize_label(s);
        CrimeType::ALL.into_iter().find(|c| c.as_str() == norm)
    }
}

impl fmt::Display for CrimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeIncident {
    pub incident_id: String,
    pub ts: NaiveDateTime,
    pub location: Point,
    pub crime_type: CrimeType,
    pub tract_id: Option<String>,
}

pub type CrimeSet = Vec<CrimeIncident>;

/// Counters for every record the ingest stage dropped or patched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub tracts_read: u64,
    pub tracts_kept: u64,
    pub venues_read: u64,
    pub venues_unassigned: u64,
    pub venues_fallback_category: u64,
    pub transitions_read: u64,
    pub transitions_invalid: u64,
    pub transitions_unknown_venue: u64,
    pub transitions_unassigned_venue: u64,
    pub checkins_read: u64,
    pub checkins_unknown_venue: u64,
    pub crimes_read: u64,
    pub crimes_other_type: u64,
    pub crimes_unassigned: u64,
}
