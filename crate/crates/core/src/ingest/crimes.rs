use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::timestamp::{format_timestamp, parse_timestamp, Timezone};
use super::{csvio, CrimeIncident, CrimeSet, CrimeType, IngestReport, TractLocator, TractSet};
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Deserialize)]
struct CrimeRow {
    incident_id: String,
    ts: String,
    lon: f64,
    lat: f64,
    crime_type: String,
}

/// Read `incident_id,ts,lon,lat,crime_type` and resolve each incident's tract.
///
/// Incidents outside the five felony types, or outside `types` when it is non-empty,
/// are dropped and counted. Incidents outside every tract are kept with `tract_id = None`.
pub fn parse_crimes(
    path: &Path,
    types: &[CrimeType],
    tracts: &TractSet,
    tz: Timezone,
    report: &mut IngestReport,
) -> Result<CrimeSet> {
    let locator = TractLocator::new(tracts);
    let mut out = Vec::new();
    csvio::for_each_row(path, &["incident_id", "ts", "lon", "lat", "crime_type"], |line, row: CrimeRow| {
        report.crimes_read += 1;
        let ts = parse_timestamp(&row.ts, tz)
            .ok_or_else(|| Error::parse(path, line, format!("unparseable timestamp {:?}", row.ts)))?;
        let crime_type = match CrimeType::parse(&row.crime_type) {
            Some(c) if types.is_empty() || types.contains(&c) => c,
            _ => {
                report.crimes_other_type += 1;
                return Ok(());
            }
        };
        let location = Point::new(row.lon, row.lat);
        let tract_id = locator.locate(location).map(|i| tracts.get(i).tract_id.clone());
        if tract_id.is_none() {
            report.crimes_unassigned += 1;
        }
        out.push(CrimeIncident {
            incident_id: row.incident_id,
            ts,
            location,
            crime_type,
            tract_id,
        });
        Ok(())
    })?;
    Ok(out)
}

#[derive(Deserialize)]
struct AssignedCrimeRow {
    incident_id: String,
    ts: String,
    lon: f64,
    lat: f64,
    crime_type: String,
    tract_id: String,
}

/// Read incidents written by [`write_crimes`], keeping their recorded tract ids.
pub fn read_crimes(path: &Path) -> Result<CrimeSet> {
    let mut out = Vec::new();
    let cols = ["incident_id", "ts", "lon", "lat", "crime_type", "tract_id"];
    csvio::for_each_row(path, &cols, |line, row: AssignedCrimeRow| {
        let ts = parse_timestamp(&row.ts, Timezone::default())
            .ok_or_else(|| Error::parse(path, line, format!("unparseable timestamp {:?}", row.ts)))?;
        let crime_type = CrimeType::parse(&row.crime_type)
            .ok_or_else(|| Error::parse(path, line, format!("unknown crime type {:?}", row.crime_type)))?;
        out.push(CrimeIncident {
            incident_id: row.incident_id,
            ts,
            location: Point::new(row.lon, row.lat),
            crime_type,
            tract_id: (!row.tract_id.is_empty()).then_some(row.tract_id),
        });
        Ok(())
    })?;
    Ok(out)
}

/// Write incidents in the input format plus a trailing `tract_id` column.
pub fn write_crimes<W: Write>(crimes: &[CrimeIncident], out: W) -> Result<()> {
    let mut w = csvio::writer(out);
    let err = |e| Error::csv("writing crimes", e);
    w.write_record(["incident_id", "ts", "lon", "lat", "crime_type", "tract_id"])
        .map_err(err)?;
    for c in crimes {
        w.write_record([
            c.incident_id.as_str(),
            &format_timestamp(&c.ts),
            &c.location.lon.to_string(),
            &c.location.lat.to_string(),
            c.crime_type.as_str(),
            c.tract_id.as_deref().unwrap_or(""),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("writing crimes", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::ingest::Tract;

    fn tracts() -> TractSet {
        let polygon = Polygon::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        TractSet::new(vec![Tract {
            tract_id: "A".into(),
            centroid: polygon.centroid().unwrap(),
            polygon,
            population: 500,
        }])
        .unwrap()
    }

    fn temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn filters_types_and_assigns() {
        let f = temp(
            "incident_id,ts,lon,lat,crime_type\n\
             1,2012-01-06T22:10:00,0.5,0.5,Larceny/Theft\n\
             2,2012-01-06T22:20:00,0.5,0.5,vandalism\n\
             3,2012-01-06T22:30:00,7.0,7.0,robbery\n\
             4,2012-01-06T22:40:00,0.2,0.2,Vehicle Theft\n",
        );
        let mut report = IngestReport::default();
        let crimes = parse_crimes(f.path(), &[], &tracts(), Timezone::default(), &mut report).unwrap();
        assert_eq!(crimes.len(), 3);
        assert_eq!(crimes[0].crime_type, CrimeType::LarcenyTheft);
        assert_eq!(crimes[0].tract_id.as_deref(), Some("A"));
        assert_eq!(crimes[1].tract_id, None);
        assert_eq!(crimes[2].crime_type, CrimeType::VehicleTheft);
        assert_eq!(report.crimes_other_type, 1);
        assert_eq!(report.crimes_unassigned, 1);

        let only_robbery =
            parse_crimes(f.path(), &[CrimeType::Robbery], &tracts(), Timezone::default(), &mut IngestReport::default())
                .unwrap();
        assert_eq!(only_robbery.len(), 1);
    }

    #[test]
    fn empty_file_is_empty_set() {
        let f = temp("");
        let crimes = parse_crimes(f.path(), &[], &tracts(), Timezone::default(), &mut IngestReport::default()).unwrap();
        assert!(crimes.is_empty());
        let header_only = temp("incident_id,ts,lon,lat,crime_type\n");
        let crimes =
            parse_crimes(header_only.path(), &[], &tracts(), Timezone::default(), &mut IngestReport::default()).unwrap();
        assert!(crimes.is_empty());
    }
}
