use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::SynthConfig;
use crate::error::Result;
use crate::geometry::{Point, Polygon};
use crate::ingest::{ActivityType, Tract, TractSet, Transition, TransitionSet, Venue, VenueIdx, VenueSet};
use crate::rng::{label, stream};
use crate::HOURS_PER_WEEK;

/// Shares of work/study, restaurants/bars, leisure, shopping and travel venues.
pub const ACTIVITY_MIX: [f64; 5] = [0.1011, 0.5011, 0.1282, 0.1556, 0.1140];

/// Venue categories emitted for each activity type.
pub const CATEGORIES: [&[&str]; 5] = [
    &["Office", "University", "Coworking Space"],
    &["Restaurant", "Bar", "Cafe", "Pizza Place"],
    &["Park", "Gym", "Movie Theater", "Museum"],
    &["Shopping Mall", "Grocery Store", "Clothing Store"],
    &["Train Station", "Bus Stop", "Hotel", "Airport"],
];

/// Inset that keeps generated points strictly inside their unit square.
const INSET: f64 = 0.001;
/// Weeks of the year used for timestamps, so that trips never spill into the next year.
const WEEKS: i64 = 51;
const MAX_DURATION_S: i64 = 3 * 3600;

/// Grid of unit-square tracts plus the venues placed in them.
#[derive(Debug, Clone)]
pub struct City {
    pub width: u32,
    pub height: u32,
    /// Tracts in id order; ids encode the grid cell.
    pub tracts: TractSet,
    /// Grid cell `(x, y)` of every tract, aligned with `tracts`.
    pub cells: Vec<(u32, u32)>,
    /// Relative attractiveness of every tract, aligned with `tracts`.
    pub popularity: Vec<f64>,
    pub venues: VenueSet,
    /// Venue positions grouped by tract.
    pub venues_by_tract: Vec<Vec<VenueIdx>>,
}

impl City {
    /// Queen-contiguity hop distance between two tracts on the full grid.
    pub fn hop_distance(&self, a: usize, b: usize) -> u32 {
        let (ax, ay) = self.cells[a];
        let (bx, by) = self.cells[b];
        ax.abs_diff(bx).max(ay.abs_diff(by))
    }
}

pub fn tract_id(x: u32, y: u32) -> String {
    format!("T{x:03}_{y:03}")
}

/// Smooth weekly activity curve: quiet nights, commute and evening peaks on weekdays,
/// a later and flatter profile on weekends.
pub fn hour_intensity(t: usize) -> f64 {
    let h = (t % 24) as f64;
    let bump = |center: f64, width: f64| (-((h - center) / width).powi(2)).exp();
    if t >= 120 {
        0.2 + bump(14.0, 4.0) + 0.8 * bump(21.0, 3.0)
    } else {
        0.15 + 0.8 * bump(8.5, 1.5) + bump(13.0, 3.0) + 0.9 * bump(19.0, 2.5)
    }
}

/// The first Monday of `year`, anchor of every generated timestamp.
pub fn first_monday(year: i32) -> NaiveDate {
    let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    let offset = (7 - jan1.weekday().num_days_from_monday()) % 7;
    jan1 + Duration::days(offset as i64)
}

/// A uniformly random instant inside hour-of-week `t` of some week of `year`.
pub(crate) fn random_instant(rng: &mut impl Rng, year: i32, t: usize) -> NaiveDateTime {
    let week = rng.random_range(0..WEEKS);
    let second = rng.random_range(0..3600);
    first_monday(year).and_hms_opt(0, 0, 0).expect("midnight")
        + Duration::days(7 * week)
        + Duration::hours(t as i64)
        + Duration::seconds(second)
}

/// A uniformly random point strictly inside grid cell `(x, y)`.
pub(crate) fn random_point(rng: &mut impl Rng, (x, y): (u32, u32)) -> Point {
    Point::new(
        x as f64 + rng.random_range(INSET..1.0 - INSET),
        y as f64 + rng.random_range(INSET..1.0 - INSET),
    )
}

fn draw_activity(rng: &mut impl Rng) -> ActivityType {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, share) in ActivityType::ALL.into_iter().zip(ACTIVITY_MIX) {
        acc += share;
        if u < acc {
            return a;
        }
    }
    ActivityType::Travel
}

pub fn generate_city(cfg: &SynthConfig) -> Result<City> {
    cfg.validate()?;
    let mut tracts = Vec::new();
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let mut rng = stream(cfg.seed, &[label("tract"), x as u64, y as u64]);
            let polygon = Polygon::rectangle(
                Point::new(x as f64, y as f64),
                Point::new(x as f64 + 1.0, y as f64 + 1.0),
            )?;
            tracts.push(Tract {
                tract_id: tract_id(x, y),
                centroid: polygon.centroid()?,
                polygon,
                population: rng.random_range(cfg.population_min..=cfg.population_max),
            });
        }
    }
    let tracts = TractSet::new(tracts)?;
    let cells: Vec<(u32, u32)> = tracts
        .tracts()
        .iter()
        .map(|t| {
            let c = t.centroid;
            (c.lon.floor() as u32, c.lat.floor() as u32)
        })
        .collect();

    let mut popularity = Vec::with_capacity(cells.len());
    let mut venues = Vec::new();
    let mut venues_by_tract = Vec::with_capacity(cells.len());
    for (k, &cell) in cells.iter().enumerate() {
        let mut rng = stream(cfg.seed, &[label("venues"), cell.0 as u64, cell.1 as u64]);
        let z: f64 = rng.sample(StandardNormal);
        popularity.push((cfg.popularity_sigma * z).exp());
        let n = rng.random_range(cfg.venues_min..=cfg.venues_max);
        let mut idx = Vec::with_capacity(n as usize);
        for j in 0..n {
            let activity = draw_activity(&mut rng);
            let names = CATEGORIES[activity.index()];
            idx.push(VenueIdx(venues.len() as u32));
            venues.push(Venue {
                venue_id: format!("V{:03}_{:03}_{j:03}", cell.0, cell.1),
                location: random_point(&mut rng, cell),
                category: names[rng.random_range(0..names.len())].to_string(),
                activity_type: activity,
                tract_id: Some(tracts.get(k).tract_id.clone()),
            });
        }
        venues_by_tract.push(idx);
    }
    Ok(City {
        width: cfg.width,
        height: cfg.height,
        tracts,
        cells,
        popularity,
        venues: VenueSet::new(venues)?,
        venues_by_tract,
    })
}

/// Cumulative destination distribution of every origin tract.
///
/// A share `selfloop_share` stays in the origin; the rest is spread over the other tracts in
/// proportion to `popularity / (1 + hops)^gravity`, computed in log space so that very large
/// exponents leave only the nearest ring.
fn destination_cdfs(cfg: &SynthConfig, city: &City) -> Vec<Vec<f64>> {
    let n = city.tracts.len();
    (0..n)
        .map(|k| {
            let logw: Vec<f64> = (0..n)
                .map(|l| {
                    if l == k {
                        f64::NEG_INFINITY
                    } else {
                        city.popularity[l].ln() - cfg.gravity * (1.0 + city.hop_distance(k, l) as f64).ln()
                    }
                })
                .collect();
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logw.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            (0..n)
                .map(|l| {
                    acc += if l == k {
                        cfg.selfloop_share
                    } else if n > 1 {
                        (1.0 - cfg.selfloop_share) * w[l] / total
                    } else {
                        0.0
                    };
                    acc
                })
                .collect()
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

/// Origin rate of every tract × hour-of-week in `year`, normalized to sum to one.
fn origin_rates(cfg: &SynthConfig, city: &City, year: i32) -> Vec<f64> {
    let mut rates = Vec::with_capacity(city.tracts.len() * HOURS_PER_WEEK);
    for (k, cell) in city.cells.iter().enumerate() {
        let mut rng = stream(cfg.seed, &[label("hourly-noise"), year as u64, cell.0 as u64, cell.1 as u64]);
        for t in 0..HOURS_PER_WEEK {
            let z: f64 = rng.sample(StandardNormal);
            rates.push(city.popularity[k] * hour_intensity(t) * (cfg.hourly_noise_sigma * z).exp());
        }
    }
    let total: f64 = rates.iter().sum();
    rates.iter_mut().for_each(|r| *r /= total);
    rates
}

/// Transitions for every feature year, sorted by start time.
pub fn generate_transitions(cfg: &SynthConfig, city: &City) -> TransitionSet {
    if cfg.transitions_per_year == 0 {
        return Vec::new();
    }
    let cdfs = destination_cdfs(cfg, city);
    let users = cfg.users.unwrap_or((cfg.transitions_per_year / 20).max(1));
    let mut out = Vec::new();
    for year in cfg.feature_years() {
        let rates = origin_rates(cfg, city, year);
        let per_origin: Vec<Vec<Transition>> = (0..city.tracts.len())
            .into_par_iter()
            .map(|k| {
                let cell = city.cells[k];
                let mut rng = stream(cfg.seed, &[label("transitions"), year as u64, cell.0 as u64, cell.1 as u64]);
                let mut trs = Vec::new();
                for t in 0..HOURS_PER_WEEK {
                    let lambda = cfg.transitions_per_year as f64 * rates[k * HOURS_PER_WEEK + t];
                    let count = if lambda > 0.0 {
                        Poisson::new(lambda).expect("positive rate").sample(&mut rng) as u64
                    } else {
                        0
                    };
                    for _ in 0..count {
                        let l = pick(&cdfs[k], rng.random());
                        let src_pool = &city.venues_by_tract[k];
                        let dst_pool = &city.venues_by_tract[l];
                        let src = src_pool[rng.random_range(0..src_pool.len())];
                        let dst = loop {
                            let v = dst_pool[rng.random_range(0..dst_pool.len())];
                            if v != src {
                                break v;
                            }
                        };
                        let start_ts = random_instant(&mut rng, year, t);
                        let end_ts = start_ts + Duration::seconds(rng.random_range(1..=MAX_DURATION_S));
                        trs.push(Transition {
                            user_key: format!("u{:06}", rng.random_range(0..users)),
                            start_ts,
                            end_ts,
                            src_venue: src,
                            dst_venue: dst,
                        });
                    }
                }
                trs
            })
            .collect();
        out.extend(per_origin.into_iter().flatten());
    }
    out.sort_by(|a, b| {
        (a.start_ts, a.end_ts, a.src_venue, a.dst_venue, &a.user_key).cmp(&(
            b.start_ts,
            b.end_ts,
            b.src_venue,
            b.dst_venue,
            &b.user_key,
        ))
    });
    out
}
