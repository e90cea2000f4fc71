//! Planar polygon geometry on (lon, lat) degree pairs.
//!
//! Coordinates are treated as planar; tracts are small enough that the
//! distortion does not matter for containment or contiguity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance tolerance (degrees) for boundary and contact tests.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
}

impl Point {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Point { lon, lat }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        p.lon >= self.min.lon - eps
            && p.lon <= self.max.lon + eps
            && p.lat >= self.min.lat - eps
            && p.lat <= self.max.lat + eps
    }

    pub fn intersects(&self, other: &BBox, eps: f64) -> bool {
        self.min.lon <= other.max.lon + eps
            && other.min.lon <= self.max.lon + eps
            && self.min.lat <= other.max.lat + eps
            && other.min.lat <= self.max.lat + eps
    }
}

/// A closed ring: the first vertex equals the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(Vec<Point>);

impl Ring {
    /// Build a ring, closing it if the input is open. Needs at least three distinct vertices.
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        if points.first() != points.last() {
            if let Some(&first) = points.first() {
                points.push(first);
            }
        }
        if points.len() < 4 {
            return Err(Error::Validation(format!(
                "ring has {} vertices, need at least 3 distinct",
                points.len().saturating_sub(1)
            )));
        }
        if points.iter().any(|p| !p.lon.is_finite() || !p.lat.is_finite()) {
            return Err(Error::Validation("ring has non-finite coordinates".into()));
        }
        Ok(Ring(points))
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    /// Shoelace signed area (positive for counter-clockwise) and first moments.
    fn area_moments(&self) -> (f64, f64, f64) {
        let origin = self.0[0];
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        for (p, q) in self.segments() {
            let (x0, y0) = (p.lon - origin.lon, p.lat - origin.lat);
            let (x1, y1) = (q.lon - origin.lon, q.lat - origin.lat);
            let cross = x0 * y1 - x1 * y0;
            a += cross;
            mx += (x0 + x1) * cross;
            my += (y0 + y1) * cross;
        }
        let area = a / 2.0;
        // Moments relative to the local origin, shifted back.
        let mx = mx / 6.0 + origin.lon * area;
        let my = my / 6.0 + origin.lat * area;
        (area, mx, my)
    }

    pub fn signed_area(&self) -> f64 {
        self.area_moments().0
    }
}

/// One connected polygon: an outer ring and zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPart {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

/// A (multi)polygon tract boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    parts: Vec<PolygonPart>,
    bbox: BBox,
}

impl Polygon {
    pub fn new(parts: Vec<PolygonPart>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Validation("polygon has no rings".into()));
        }
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in parts.iter().flat_map(|part| part.exterior.points()) {
            min.lon = min.lon.min(p.lon);
            min.lat = min.lat.min(p.lat);
            max.lon = max.lon.max(p.lon);
            max.lat = max.lat.max(p.lat);
        }
        Ok(Polygon {
            parts,
            bbox: BBox { min, max },
        })
    }

    /// Single-ring polygon from a vertex list.
    pub fn from_exterior(points: Vec<Point>) -> Result<Self> {
        Polygon::new(vec![PolygonPart {
            exterior: Ring::new(points)?,
            holes: Vec::new(),
        }])
    }

    /// Axis-aligned rectangle, handy for grids and tests.
    pub fn rectangle(min: Point, max: Point) -> Result<Self> {
        Polygon::from_exterior(vec![
            min,
            Point::new(max.lon, min.lat),
            max,
            Point::new(min.lon, max.lat),
        ])
    }

    pub fn parts(&self) -> &[PolygonPart] {
        &self.parts
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> + '_ {
        self.parts
            .iter()
            .flat_map(|p| std::iter::once(&p.exterior).chain(p.holes.iter()))
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(Ring::segments)
    }

    /// Area and first moments with exteriors counted positive and holes negative.
    fn area_moments(&self) -> (f64, f64, f64) {
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        for part in &self.parts {
            let (ea, ex, ey) = part.exterior.area_moments();
            let s = ea.signum();
            a += s * ea;
            mx += s * ex;
            my += s * ey;
            for hole in &part.holes {
                let (ha, hx, hy) = hole.area_moments();
                let s = ha.signum();
                a -= s * ha;
                mx -= s * hx;
                my -= s * hy;
            }
        }
        (a, mx, my)
    }

    pub fn area(&self) -> f64 {
        self.area_moments().0
    }

    /// Area-weighted centroid. Fails for zero-area polygons.
    pub fn centroid(&self) -> Result<Point> {
        let (a, mx, my) = self.area_moments();
        let extent = (self.bbox.max.lon - self.bbox.min.lon).max(self.bbox.max.lat - self.bbox.min.lat);
        if !(a.abs() > 1e-12 * extent * extent) {
            return Err(Error::Validation("polygon has zero area".into()));
        }
        Ok(Point::new(mx / a, my / a))
    }

    /// Even-odd containment; points on any ring count as inside.
    pub fn contains(&self, p: Point) -> bool {
        if !self.bbox.contains(p, BOUNDARY_EPS) {
            return false;
        }
        if self.segments().any(|(a, b)| point_segment_distance(p, a, b) <= BOUNDARY_EPS) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when the two boundaries share at least one point (queen contact).
    pub fn touches(&self, other: &Polygon) -> bool {
        if !self.bbox.intersects(&other.bbox, BOUNDARY_EPS) {
            return false;
        }
        let theirs: Vec<(Point, Point)> = other
            .segments()
            .filter(|(a, b)| segment_bbox(*a, *b).intersects(&self.bbox, BOUNDARY_EPS))
            .collect();
        self.segments()
            .filter(|(a, b)| segment_bbox(*a, *b).intersects(&other.bbox, BOUNDARY_EPS))
            .any(|(a, b)| theirs.iter().any(|&(c, d)| segments_touch(a, b, c, d)))
    }
}

fn segment_bbox(a: Point, b: Point) -> BBox {
    BBox {
        min: Point::new(a.lon.min(b.lon), a.lat.min(b.lat)),
        max: Point::new(a.lon.max(b.lon), a.lat.max(b.lat)),
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.lon + t * dx, a.lat + t * dy);
    ((p.lon - qx).powi(2) + (p.lat - qy).powi(2)).sqrt()
}

/// Closed-segment contact test: proper crossing, or an endpoint within tolerance of the other segment.
fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    point_segment_distance(a, c, d) <= BOUNDARY_EPS
        || point_segment_distance(b, c, d) <= BOUNDARY_EPS
        || point_segment_distance(c, a, b) <= BOUNDARY_EPS
        || point_segment_distance(d, a, b) <= BOUNDARY_EPS
}
