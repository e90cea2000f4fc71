use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use log::warn;
use serde::Deserialize;

use super::{csvio, normalize_label, ActivityType, IngestReport, TractLocator, TractSet, Venue, VenueSet};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Category label reserved for the fallback row of a mapping file.
pub const FALLBACK_CATEGORY: &str = "other";

/// Venue category to activity type table, with an optional fallback for unmapped categories.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap {
    map: HashMap<String, ActivityType>,
    fallback: Option<ActivityType>,
}

impl CategoryMap {
    pub fn new(entries: impl IntoIterator<Item = (String, ActivityType)>) -> Self {
        let mut out = CategoryMap::default();
        for (category, activity) in entries {
            out.insert(&category, activity);
        }
        out
    }

    fn insert(&mut self, category: &str, activity: ActivityType) {
        let key = normalize_label(category);
        if key == FALLBACK_CATEGORY {
            self.fallback = Some(activity);
        } else {
            self.map.insert(key, activity);
        }
    }

    /// Mapped activity, and whether the fallback had to be used.
    pub fn resolve(&self, category: &str) -> Option<(ActivityType, bool)> {
        match self.map.get(&normalize_label(category)) {
            Some(&a) => Some((a, false)),
            None => self.fallback.map(|a| (a, true)),
        }
    }
}

#[derive(Deserialize)]
struct CategoryRow {
    category: String,
    activity_type: String,
}

pub fn parse_category_map(path: &Path) -> Result<CategoryMap> {
    let mut out = CategoryMap::default();
    csvio::for_each_row(path, &["category", "activity_type"], |line, row: CategoryRow| {
        let activity: ActivityType = row
            .activity_type
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        out.insert(&row.category, activity);
        Ok(())
    })?;
    Ok(out)
}

#[derive(Deserialize)]
struct VenueRow {
    venue_id: String,
    lon: f64,
    lat: f64,
    category: String,
}

/// Read `venue_id,lon,lat,category`; tract ids are filled in later by [`assign_venues`].
pub fn parse_venues(path: &Path, categories: &CategoryMap, report: &mut IngestReport) -> Result<VenueSet> {
    let mut venues = Vec::new();
    let mut fallback_seen: HashMap<String, u64> = HashMap::new();
    csvio::for_each_row(path, &["venue_id", "lon", "lat", "category"], |line, row: VenueRow| {
        if !row.lon.is_finite() || !row.lat.is_finite() {
            return Err(Error::parse(path, line, "non-finite coordinates"));
        }
        let (activity_type, fallback) = categories.resolve(&row.category).ok_or_else(|| {
            Error::parse(
                path,
                line,
                format!(
                    "category {:?} has no mapping and the mapping file declares no {FALLBACK_CATEGORY:?} row",
                    row.category
                ),
            )
        })?;
        if fallback {
            report.venues_fallback_category += 1;
            *fallback_seen.entry(row.category.clone()).or_default() += 1;
        }
        venues.push(Venue {
            venue_id: row.venue_id,
            location: Point::new(row.lon, row.lat),
            category: row.category,
            activity_type,
            tract_id: None,
        });
        Ok(())
    })?;
    let mut unmapped: Vec<_> = fallback_seen.into_iter().collect();
    unmapped.sort();
    for (category, n) in unmapped {
        warn!("category {category:?} unmapped; {n} venue(s) use the fallback activity type");
    }
    report.venues_read += venues.len() as u64;
    VenueSet::new(venues)
}

/// Resolve each venue's tract. Returns the number of venues outside every tract.
pub fn assign_venues(venues: &mut VenueSet, tracts: &TractSet) -> u64 {
    let locator = TractLocator::new(tracts);
    let mut unassigned = 0;
    for v in venues.venues_mut() {
        v.tract_id = locator.locate(v.location).map(|i| tracts.get(i).tract_id.clone());
        if v.tract_id.is_none() {
            unassigned += 1;
        }
    }
    unassigned
}

#[derive(Deserialize)]
struct AssignedVenueRow {
    venue_id: String,
    lon: f64,
    lat: f64,
    category: String,
    activity_type: String,
    tract_id: String,
}

/// Read venues written by [`write_venues`], keeping their activity types and tract ids.
pub fn read_venues(path: &Path) -> Result<VenueSet> {
    let mut venues = Vec::new();
    let cols = ["venue_id", "lon", "lat", "category", "activity_type", "tract_id"];
    csvio::for_each_row(path, &cols, |line, row: AssignedVenueRow| {
        let activity_type: ActivityType = row
            .activity_type
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        venues.push(Venue {
            venue_id: row.venue_id,
            location: Point::new(row.lon, row.lat),
            category: row.category,
            activity_type,
            tract_id: (!row.tract_id.is_empty()).then_some(row.tract_id),
        });
        Ok(())
    })?;
    VenueSet::new(venues)
}

/// Write `venue_id,lon,lat,category,activity_type,tract_id`.
pub fn write_venues<W: Write>(venues: &VenueSet, out: W) -> Result<()> {
    let mut w = csvio::writer(out);
    let err = |e| Error::csv("writing venues", e);
    w.write_record(["venue_id", "lon", "lat", "category", "activity_type", "tract_id"])
        .map_err(err)?;
    for v in venues.venues() {
        w.write_record([
            v.venue_id.as_str(),
            &v.location.lon.to_string(),
            &v.location.lat.to_string(),
            &v.category,
            v.activity_type.as_str(),
            v.tract_id.as_deref().unwrap_or(""),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("writing venues", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn mapping_and_fallback() {
        let map = temp("category,activity_type\nSpanish Restaurant,restaurants_bars\nOffice,work/study\nother,leisure\n");
        let cats = parse_category_map(map.path()).unwrap();
        assert_eq!(cats.resolve("Spanish restaurant"), Some((ActivityType::RestaurantsBars, false)));
        assert_eq!(cats.resolve("office"), Some((ActivityType::WorkStudy, false)));
        assert_eq!(cats.resolve("Zoo"), Some((ActivityType::Leisure, true)));

        let venues = temp("venue_id,lon,lat,category\nv1,0.5,0.5,Spanish restaurant\nv2,0.2,0.2,Zoo\n");
        let mut report = IngestReport::default();
        let set = parse_venues(venues.path(), &cats, &mut report).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get(set.lookup("v1").unwrap()).activity_type, ActivityType::RestaurantsBars);
        assert_eq!(report.venues_fallback_category, 1);
    }

    #[test]
    fn unmapped_without_fallback_is_an_error() {
        let cats = CategoryMap::new([("Office".to_string(), ActivityType::WorkStudy)]);
        let venues = temp("venue_id,lon,lat,category\nv1,0.5,0.5,Office\nv2,0.2,0.2,Zoo\n");
        let err = parse_venues(venues.path(), &cats, &mut IngestReport::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn unparseable_row_reports_line() {
        let cats = CategoryMap::new([("Office".to_string(), ActivityType::WorkStudy)]);
        let venues = temp("venue_id,lon,lat,category\nv1,0.5,0.5,Office\nv2,abc,0.2,Office\n");
        let err = parse_venues(venues.path(), &cats, &mut IngestReport::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }
}
