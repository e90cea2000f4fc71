use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::city::CATEGORIES;
use super::{SynthCity, SynthConfig, TrueCoefficients};
use crate::error::{Error, Result};
use crate::ingest::{csv_writer, format_timestamp, write_tracts_geojson, write_transitions, ActivityType};
use crate::panel::{TractHourCounts, COVARIATE_COLUMNS};

/// Input files of a synthetic city, in the formats the ingest stage reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthFile {
    Tracts,
    Venues,
    CategoryMap,
    Transitions,
    Crimes,
    Covariates,
}

impl SynthFile {
    pub const ALL: [SynthFile; 6] = [
        SynthFile::Tracts,
        SynthFile::Venues,
        SynthFile::CategoryMap,
        SynthFile::Transitions,
        SynthFile::Crimes,
        SynthFile::Covariates,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            SynthFile::Tracts => "tracts.geojson",
            SynthFile::Venues => "venues.csv",
            SynthFile::CategoryMap => "category_map.csv",
            SynthFile::Transitions => "transitions.csv",
            SynthFile::Crimes => "crimes.csv",
            SynthFile::Covariates => "covariates.csv",
        }
    }
}

/// Realized truth of one year, tract-major over the kept tracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearTruth {
    pub year: i32,
    /// True for the crime-only base year.
    pub base: bool,
    pub mean: Vec<f64>,
    pub crime: Vec<u64>,
    pub past_crime: Option<Vec<u64>>,
    pub checkins: Option<Vec<u64>>,
    pub inout_flow: Option<Vec<u64>>,
    pub selfloop_flow: Option<Vec<u64>>,
    pub passthrough_flow: Option<Vec<u64>>,
}

/// Everything the generator knew. Written apart from the input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub coefficients: TrueCoefficients,
    pub dispersion: Option<f64>,
    pub kept_tracts: Vec<String>,
    pub alpha: BTreeMap<String, f64>,
    pub theta: Vec<f64>,
    pub years: Vec<YearTruth>,
}

fn flat(c: &TractHourCounts) -> Vec<u64> {
    (0..c.tracts()).flat_map(|i| c.row(i).iter().copied()).collect()
}

impl SynthCity {
    pub fn ground_truth(&self) -> GroundTruth {
        let crime = &self.crime;
        let mut years = Vec::with_capacity(crime.years.len());
        for (step, yc) in crime.years.iter().enumerate() {
            let f = step.checked_sub(1).map(|s| &self.features[s]);
            years.push(YearTruth {
                year: yc.year,
                base: f.is_none(),
                mean: yc.mean.clone(),
                crime: flat(&yc.counts),
                past_crime: f.map(|_| flat(&crime.years[step - 1].counts)),
                checkins: f.map(|f| flat(&f.mobility.checkins)),
                inout_flow: f.map(|f| flat(&f.mobility.inout)),
                selfloop_flow: f.map(|f| flat(&f.mobility.selfloop)),
                passthrough_flow: f.map(|f| {
                    (0..self.kept.len())
                        .flat_map(|i| f.passthrough.row(i).iter().copied())
                        .collect()
                }),
            });
        }
        GroundTruth {
            config: self.config.clone(),
            coefficients: self.config.truth,
            dispersion: self.config.dispersion,
            kept_tracts: self.kept.ids().map(str::to_string).collect(),
            alpha: self.kept.ids().map(str::to_string).zip(crime.alpha.iter().copied()).collect(),
            theta: crime.theta.clone(),
            years,
        }
    }

    pub fn write_ground_truth<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.ground_truth())
            .map_err(|e| Error::Json { context: "writing ground truth".into(), source: e })
    }

    pub fn write_file<W: Write>(&self, file: SynthFile, out: W) -> Result<()> {
        let err = |e| Error::csv(format!("writing {}", file.file_name()), e);
        match file {
            SynthFile::Tracts => return write_tracts_geojson(&self.city.tracts, out),
            SynthFile::Transitions => return write_transitions(&self.transitions, &self.city.venues, out),
            SynthFile::Venues => {
                let mut w = csv_writer(out);
                w.write_record(["venue_id", "lon", "lat", "category"]).map_err(err)?;
                for v in self.city.venues.venues() {
                    w.write_record([
                        v.venue_id.as_str(),
                        &v.location.lon.to_string(),
                        &v.location.lat.to_string(),
                        &v.category,
                    ])
                    .map_err(err)?;
                }
                w.flush().map_err(|e| Error::io("writing venues", e))?;
            }
            SynthFile::CategoryMap => {
                let mut w = csv_writer(out);
                w.write_record(["category", "activity_type"]).map_err(err)?;
                for (activity, names) in ActivityType::ALL.into_iter().zip(CATEGORIES) {
                    for name in names {
                        w.write_record([*name, activity.as_str()]).map_err(err)?;
                    }
                }
                w.flush().map_err(|e| Error::io("writing category map", e))?;
            }
            SynthFile::Crimes => {
                let mut w = csv_writer(out);
                w.write_record(["incident_id", "ts", "lon", "lat", "crime_type"]).map_err(err)?;
                for c in &self.crime.incidents {
                    w.write_record([
                        c.incident_id.as_str(),
                        &format_timestamp(&c.ts),
                        &c.location.lon.to_string(),
                        &c.location.lat.to_string(),
                        c.crime_type.as_str(),
                    ])
                    .map_err(err)?;
                }
                w.flush().map_err(|e| Error::io("writing crimes", e))?;
            }
            SynthFile::Covariates => {
                let mut w = csv_writer(out);
                let mut header = vec!["tract_id"];
                header.extend(COVARIATE_COLUMNS);
                w.write_record(&header).map_err(err)?;
                for id in self.city.tracts.ids() {
                    let v = self.covariates.get(id).expect("covariates cover every tract");
                    w.write_record([id.to_string(), v[0].to_string(), v[1].to_string(), v[2].to_string()])
                        .map_err(err)?;
                }
                w.flush().map_err(|e| Error::io("writing covariates", e))?;
            }
        }
        Ok(())
    }
}
