use std::collections::HashMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{TractSet, Transition, VenueSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub pop_min: u64,
    pub checkin_min: u64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            pop_min: 100,
            checkin_min: 100,
        }
    }
}

/// Check-ins per tract: both endpoints of every transition starting in `year`.
/// With `year = None` all years are pooled.
pub fn annual_checkins(transitions: &[Transition], venues: &VenueSet, year: Option<i32>) -> HashMap<String, u64> {
    let mut out: HashMap<String, u64> = HashMap::new();
    for t in transitions {
        if year.is_some_and(|y| t.start_ts.year() != y) {
            continue;
        }
        for venue in [t.src_venue, t.dst_venue] {
            if let Some(id) = &venues.get(venue).tract_id {
                *out.entry(id.clone()).or_default() += 1;
            }
        }
    }
    out
}

/// Keep tracts with `population >= pop_min` and `annual check-ins >= checkin_min`.
/// Tracts missing from `annual_checkins` have zero check-ins.
pub fn filter_tracts(tracts: &TractSet, annual_checkins: &HashMap<String, u64>, params: FilterParams) -> Result<TractSet> {
    let kept = tracts.retain(|t| {
        t.population >= params.pop_min
            && annual_checkins.get(&t.tract_id).copied().unwrap_or(0) >= params.checkin_min
    });
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "no tract has population >= {} and at least {} annual check-ins",
            params.pop_min, params.checkin_min
        )));
    }
    Ok(kept)
}
