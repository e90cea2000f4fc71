use std::io::Write;
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, JsonValue, Value};

use super::{Tract, TractSet};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point, Polygon, PolygonPart, Ring};

fn ring_from_positions(positions: &[Vec<f64>]) -> Result<Ring> {
    let points = positions
        .iter()
        .map(|p| match p.as_slice() {
            [lon, lat, ..] => Ok(Point::new(*lon, *lat)),
            _ => Err(Error::Validation("position needs two coordinates".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ring::new(points)
}

fn part_from_rings(rings: &[Vec<Vec<f64>>]) -> Result<PolygonPart> {
    let (exterior, holes) = rings
        .split_first()
        .ok_or_else(|| Error::Validation("polygon without rings".into()))?;
    Ok(PolygonPart {
        exterior: ring_from_positions(exterior)?,
        holes: holes.iter().map(|r| ring_from_positions(r)).collect::<Result<_>>()?,
    })
}

fn polygon_from_geometry(geometry: &Geometry) -> Result<Polygon> {
    let parts = match &geometry.value {
        Value::Polygon(rings) => vec![part_from_rings(rings)?],
        Value::MultiPolygon(polys) => polys.iter().map(|p| part_from_rings(p)).collect::<Result<_>>()?,
        other => {
            return Err(Error::Validation(format!(
                "expected Polygon or MultiPolygon, found {}",
                other.type_name()
            )))
        }
    };
    Polygon::new(parts)
}

fn string_property(props: &JsonObject, key: &str) -> Option<String> {
    match props.get(key)? {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn population_property(props: &JsonObject) -> Option<u64> {
    match props.get("population")? {
        JsonValue::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|v| *v >= 0.0 && v.fract() == 0.0).map(|v| v as u64)),
        JsonValue::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn tract_from_feature(feature: &Feature) -> Result<Tract> {
    let props = feature
        .properties
        .as_ref()
        .ok_or_else(|| Error::Validation("feature has no properties".into()))?;
    let tract_id = string_property(props, "tract_id")
        .ok_or_else(|| Error::Validation("missing string property tract_id".into()))?;
    let population = population_property(props)
        .ok_or_else(|| Error::Validation(format!("tract {tract_id:?}: missing or negative population")))?;
    let geometry = feature
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("tract {tract_id:?}: no geometry")))?;
    let polygon = polygon_from_geometry(geometry).map_err(|e| Error::Validation(format!("tract {tract_id:?}: {e}")))?;
    let centroid = polygon
        .centroid()
        .map_err(|e| Error::Validation(format!("tract {tract_id:?}: {e}")))?;
    Ok(Tract {
        tract_id,
        polygon,
        centroid,
        population,
    })
}

/// Read a GeoJSON FeatureCollection of tracts with `tract_id` and `population` properties.
pub fn parse_tracts(path: &Path) -> Result<TractSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let geojson: GeoJson = text
        .parse()
        .map_err(|e| Error::parse(path, 0, format!("invalid GeoJSON: {e}")))?;
    let collection = match geojson {
        GeoJson::FeatureCollection(fc) => fc,
        _ => return Err(Error::parse(path, 0, "expected a FeatureCollection")),
    };
    let tracts = collection
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| tract_from_feature(f).map_err(|e| Error::parse(path, 0, format!("feature #{i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    TractSet::new(tracts)
}

fn ring_positions(ring: &Ring) -> Vec<Vec<f64>> {
    ring.points().iter().map(|p| vec![p.lon, p.lat]).collect()
}

/// Write tracts as a FeatureCollection readable by [`parse_tracts`].
pub fn write_tracts_geojson<W: Write>(tracts: &TractSet, mut out: W) -> Result<()> {
    let features = tracts
        .tracts()
        .iter()
        .map(|t| {
            let polys: Vec<Vec<Vec<Vec<f64>>>> = t
                .polygon
                .parts()
                .iter()
                .map(|part| {
                    std::iter::once(&part.exterior)
                        .chain(part.holes.iter())
                        .map(ring_positions)
                        .collect()
                })
                .collect();
            let value = if polys.len() == 1 {
                Value::Polygon(polys.into_iter().next().unwrap())
            } else {
                Value::MultiPolygon(polys)
            };
            let mut props = JsonObject::new();
            props.insert("tract_id".into(), JsonValue::String(t.tract_id.clone()));
            props.insert("population".into(), JsonValue::from(t.population));
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(value)),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    };
    serde_json::to_writer(&mut out, &fc).map_err(|e| Error::Json {
        context: "writing tracts".into(),
        source: e,
    })?;
    out.write_all(b"\n").map_err(|e| Error::io("writing tracts", e))
}

/// Uniform grid over tract bounding boxes for fast point lookups.
#[derive(Debug, Clone)]
pub struct TractLocator<'a> {
    tracts: &'a TractSet,
    extent: BBox,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl<'a> TractLocator<'a> {
    pub fn new(tracts: &'a TractSet) -> Self {
        let n = tracts.len().max(1);
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in tracts.tracts() {
            let b = t.polygon.bbox();
            min.lon = min.lon.min(b.min.lon);
            min.lat = min.lat.min(b.min.lat);
            max.lon = max.lon.max(b.max.lon);
            max.lat = max.lat.max(b.max.lat);
        }
        let side = ((n as f64).sqrt().ceil() as usize).max(1);
        let (cols, rows) = (side, side);
        let mut loc = TractLocator {
            tracts,
            extent: BBox { min, max },
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        };
        if tracts.is_empty() {
            return loc;
        }
        for (i, t) in tracts.tracts().iter().enumerate() {
            let b = t.polygon.bbox();
            let (c0, r0) = loc.cell_of(b.min);
            let (c1, r1) = loc.cell_of(b.max);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    loc.cells[r * cols + c].push(i);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = (p.lon - self.extent.min.lon) / (self.extent.max.lon - self.extent.min.lon);
        let fy = (p.lat - self.extent.min.lat) / (self.extent.max.lat - self.extent.min.lat);
        let clamp = |f: f64, n: usize| {
            if f.is_finite() {
                ((f * n as f64).floor().max(0.0) as usize).min(n - 1)
            } else {
                0
            }
        };
        (clamp(fx, self.cols), clamp(fy, self.rows))
    }

    /// Position of the containing tract; boundary ties go to the smallest `tract_id`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if self.tracts.is_empty() || !self.extent.contains(p, crate::geometry::BOUNDARY_EPS) {
            return None;
        }
        // Boundary points may sit on a cell edge; probe neighbouring cells too.
        let (c, r) = self.cell_of(p);
        let mut best: Option<usize> = None;
        for rr in r.saturating_sub(1)..=(r + 1).min(self.rows - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(self.cols - 1) {
                for &i in &self.cells[rr * self.cols + cc] {
                    if best.is_some_and(|b| b <= i) {
                        continue;
                    }
                    if self.tracts.get(i).polygon.contains(p) {
                        best = Some(i);
                    }
                }
            }
        }
        best
    }
}

/// The tract whose polygon contains `p` (boundary inclusive), or `None`.
pub fn assign_point_to_tract(p: Point, tracts: &TractSet) -> Option<&str> {
    tracts
        .tracts()
        .iter()
        .find(|t| t.polygon.contains(p))
        .map(|t| t.tract_id.as_str())
}
