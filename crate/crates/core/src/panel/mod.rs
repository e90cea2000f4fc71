//! The tract × hour-of-week feature panel.

mod aggregate;
mod covariates;
mod io;

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flownet::PassThroughCounts;
use crate::ingest::{CrimeSet, CrimeType, FilterParams, TractSet, Transition, VenueSet};
use crate::HOURS_PER_WEEK;

pub use aggregate::{
    aggregate_checkins, aggregate_crime, decompose_flows, mobility_counts, transitions_in_year, EndpointDrops,
    MobilityCounts, TractHourCounts, ACTIVITY_COLUMNS,
};
pub use covariates::{parse_covariates, Covariates, COVARIATE_COLUMNS};

/// First weekend hour: Saturday 00:00.
pub const WEEKEND_START: usize = 120;

/// Hour-of-week of a naive local timestamp: `24 × weekday + hour` with Monday = 0.
pub fn hour_of_week_local(ts: &NaiveDateTime) -> usize {
    24 * ts.weekday().num_days_from_monday() as usize + ts.hour() as usize
}

/// Hour-of-week of an instant seen in `tz`.
pub fn hour_of_week<Tz: TimeZone, Z: TimeZone>(ts: &DateTime<Z>, tz: &Tz) -> usize {
    hour_of_week_local(&ts.with_timezone(tz).naive_local())
}

pub fn is_weekend(t: usize) -> bool {
    t >= WEEKEND_START
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub tract_id: String,
    pub t: usize,
    pub crime: u64,
    pub past_crime: u64,
    pub checkins: u64,
    pub inout_flow: u64,
    pub selfloop_flow: u64,
    pub passthrough_flow: u64,
    pub x: f64,
    pub y: f64,
    pub weekend: bool,
    pub activity: Option<[u64; 5]>,
    pub covariates: Option<[f64; 3]>,
}

/// Where a panel came from. Not part of the exported table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_digests: BTreeMap<String, String>,
    pub filter: Option<FilterParams>,
    pub crime_types: Vec<String>,
}

/// Complete grid ordered by tract id, then hour.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub year: i32,
    rows: Vec<PanelRow>,
    pub provenance: Provenance,
}

impl Panel {
    /// Validates completeness and ordering.
    pub fn from_rows(year: i32, rows: Vec<PanelRow>, provenance: Provenance) -> Result<Self> {
        if rows.is_empty() || !rows.len().is_multiple_of(HOURS_PER_WEEK) {
            return Err(Error::Validation(format!(
                "panel has {} rows, not a multiple of {HOURS_PER_WEEK}",
                rows.len()
            )));
        }
        let has_activity = rows[0].activity.is_some();
        let has_cov = rows[0].covariates.is_some();
        for (chunk_idx, chunk) in rows.chunks(HOURS_PER_WEEK).enumerate() {
            let id = &chunk[0].tract_id;
            if chunk_idx > 0 && rows[(chunk_idx - 1) * HOURS_PER_WEEK].tract_id >= *id {
                return Err(Error::Validation(format!("panel tract {id} out of order or duplicated")));
            }
            for (t, row) in chunk.iter().enumerate() {
                if row.tract_id != *id || row.t != t {
                    return Err(Error::Validation(format!(
                        "panel row for tract {} hour {} breaks the tract × hour grid",
                        row.tract_id, row.t
                    )));
                }
                if row.weekend != is_weekend(t) {
                    return Err(Error::Validation(format!("weekend flag wrong at tract {id} hour {t}")));
                }
                if row.activity.is_some() != has_activity || row.covariates.is_some() != has_cov {
                    return Err(Error::Validation("optional panel columns present on some rows only".into()));
                }
            }
        }
        Ok(Panel { year, rows, provenance })
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_tracts(&self) -> usize {
        self.rows.len() / HOURS_PER_WEEK
    }

    pub fn tract_ids(&self) -> Vec<&str> {
        self.rows.iter().step_by(HOURS_PER_WEEK).map(|r| r.tract_id.as_str()).collect()
    }

    /// Row index of the tract owning row `i`.
    pub fn tract_index(&self, i: usize) -> usize {
        i / HOURS_PER_WEEK
    }

    pub fn has_activity(&self) -> bool {
        self.rows[0].activity.is_some()
    }

    pub fn has_covariates(&self) -> bool {
        self.rows[0].covariates.is_some()
    }

    /// Numeric column by export name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let get: Box<dyn Fn(&PanelRow) -> f64> = match name {
            "t" => Box::new(|r| r.t as f64),
            "crime" => Box::new(|r| r.crime as f64),
            "past_crime" => Box::new(|r| r.past_crime as f64),
            "checkins" => Box::new(|r| r.checkins as f64),
            "inout_flow" => Box::new(|r| r.inout_flow as f64),
            "selfloop_flow" => Box::new(|r| r.selfloop_flow as f64),
            "passthrough_flow" => Box::new(|r| r.passthrough_flow as f64),
            "x" => Box::new(|r| r.x),
            "y" => Box::new(|r| r.y),
            "weekend" => Box::new(|r| if r.weekend { 1.0 } else { 0.0 }),
            _ => {
                if let Some(k) = ACTIVITY_COLUMNS.iter().position(|c| *c == name) {
                    if !self.has_activity() {
                        return None;
                    }
                    Box::new(move |r| r.activity.map_or(0.0, |a| a[k] as f64))
                } else {
                    let k = COVARIATE_COLUMNS.iter().position(|c| *c == name)?;
                    if !self.has_covariates() {
                        return None;
                    }
                    Box::new(move |r| r.covariates.map_or(0.0, |c| c[k]))
                }
            }
        };
        Some(self.rows.iter().map(get).collect())
    }

    /// Replace the response with another crime grid over the same tracts (crime-type splits).
    pub fn with_crime(&self, crime: &TractHourCounts, past_crime: &TractHourCounts) -> Result<Panel> {
        if crime.tracts() != self.n_tracts() || past_crime.tracts() != self.n_tracts() {
            return Err(Error::Validation("crime grid does not match panel tracts".into()));
        }
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            row.crime = crime.get(i / HOURS_PER_WEEK, row.t);
            row.past_crime = past_crime.get(i / HOURS_PER_WEEK, row.t);
        }
        Ok(out)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_panel(self, out)
    }

    pub fn read_csv(path: &std::path::Path, year: i32) -> Result<Panel> {
        io::read_panel(path, year)
    }
}

/// Per-tract aggregates that make up one year's panel.
pub struct PanelInputs<'a> {
    pub tracts: &'a TractSet,
    pub crime: &'a TractHourCounts,
    pub past_crime: &'a TractHourCounts,
    pub mobility: &'a MobilityCounts,
    pub passthrough: &'a PassThroughCounts,
    pub include_activity: bool,
    pub covariates: Option<&'a Covariates>,
}

pub fn assemble_panel(year: i32, inputs: &PanelInputs<'_>, provenance: Provenance) -> Result<Panel> {
    let tracts = inputs.tracts;
    let n = tracts.len();
    let grids = [
        ("crime", inputs.crime.tracts()),
        ("past_crime", inputs.past_crime.tracts()),
        ("checkins", inputs.mobility.checkins.tracts()),
        ("pass-through", inputs.passthrough.ids().len()),
    ];
    for (name, len) in grids {
        if len != n {
            return Err(Error::Validation(format!("{name} grid covers {len} tracts, expected {n}")));
        }
    }
    if !inputs.passthrough.ids().iter().map(String::as_str).eq(tracts.ids()) {
        return Err(Error::Validation("pass-through counts use a different tract set".into()));
    }
    let cov = match inputs.covariates {
        Some(c) => Some(c.for_tracts(tracts)?),
        None => None,
    };
    let m = inputs.mobility;
    let mut rows = Vec::with_capacity(n * HOURS_PER_WEEK);
    for (i, tract) in tracts.tracts().iter().enumerate() {
        for t in 0..HOURS_PER_WEEK {
            rows.push(PanelRow {
                tract_id: tract.tract_id.clone(),
                t,
                crime: inputs.crime.get(i, t),
                past_crime: inputs.past_crime.get(i, t),
                checkins: m.checkins.get(i, t),
                inout_flow: m.inout.get(i, t),
                selfloop_flow: m.selfloop.get(i, t),
                passthrough_flow: inputs.passthrough.get(i, t),
                x: tract.centroid.lon,
                y: tract.centroid.lat,
                weekend: is_weekend(t),
                activity: inputs.include_activity.then(|| std::array::from_fn(|k| m.activity[k].get(i, t))),
                covariates: cov.as_ref().map(|c| c[i]),
            });
        }
    }
    Panel::from_rows(year, rows, provenance)
}

/// Options for [`build_panel`].
#[derive(Debug, Clone, Default)]
pub struct PanelOptions {
    pub crime_types: Vec<CrimeType>,
    pub include_activity: bool,
}

/// Counts dropped while building a panel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelReport {
    pub transitions: u64,
    pub dropped_endpoints: u64,
    pub cross_tract: u64,
    pub same_tract: u64,
    pub partial: u64,
    pub crimes_outside_tracts: u64,
    pub past_crimes_outside_tracts: u64,
}

/// One year's panel from year-filtered transitions and precomputed pass-through counts.
#[allow(clippy::too_many_arguments)]
pub fn build_panel(
    year: i32,
    tracts: &TractSet,
    venues: &VenueSet,
    transitions: &[Transition],
    crimes: &CrimeSet,
    passthrough: &PassThroughCounts,
    covariates: Option<&Covariates>,
    options: &PanelOptions,
    provenance: Provenance,
) -> Result<(Panel, PanelReport)> {
    let in_year = transitions_in_year(transitions, year);
    let mobility = mobility_counts(&in_year, venues, tracts);
    let (crime, crimes_outside) = aggregate_crime(crimes, tracts, year, &options.crime_types);
    let (past_crime, past_outside) = aggregate_crime(crimes, tracts, year - 1, &options.crime_types);
    let panel = assemble_panel(
        year,
        &PanelInputs {
            tracts,
            crime: &crime,
            past_crime: &past_crime,
            mobility: &mobility,
            passthrough,
            include_activity: options.include_activity,
            covariates,
        },
        provenance,
    )?;
    let d = mobility.drops;
    let report = PanelReport {
        transitions: d.transitions,
        dropped_endpoints: d.dropped_endpoints,
        cross_tract: d.cross_tract,
        same_tract: d.same_tract,
        partial: d.partial,
        crimes_outside_tracts: crimes_outside,
        past_crimes_outside_tracts: past_outside,
    };
    Ok((panel, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, min, 0).unwrap()
    }

    #[test]
    fn hour_of_week_convention() {
        // 2024-01-01 is a Monday.
        assert_eq!(hour_of_week_local(&ts(2024, 1, 1, 0, 30)), 0);
        assert_eq!(hour_of_week_local(&ts(2024, 1, 1, 23, 10)), 23);
        assert_eq!(hour_of_week_local(&ts(2024, 1, 7, 23, 59)), 167);
        assert_eq!(hour_of_week_local(&ts(2024, 1, 5, 22, 5)), 118);
        assert!(!is_weekend(119));
        assert!(is_weekend(120));
    }

    #[test]
    fn hour_of_week_converts_zone() {
        let utc = chrono::Utc.with_ymd_and_hms(2024, 1, 1, 8, 0, 0).unwrap();
        // 08:00 UTC Monday is 00:00 Monday in Los Angeles (UTC-8).
        assert_eq!(hour_of_week(&utc, &chrono_tz::America::Los_Angeles), 0);
        assert_eq!(hour_of_week(&utc, &chrono::Utc), 8);
    }
}
