use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use super::city::{random_instant, random_point};
use super::{SynthConfig, YearFeatures};
use crate::error::{Error, Result};
use crate::ingest::{CrimeIncident, CrimeSet, CrimeType, TractSet};
use crate::panel::TractHourCounts;
use crate::rng::{label, stream};
use crate::HOURS_PER_WEEK;

/// Shares of the five crime types among generated incidents.
pub const CRIME_MIX: [f64; 5] = [0.55, 0.10, 0.15, 0.12, 0.08];

/// Realized crime process of one year.
#[derive(Debug, Clone)]
pub struct YearCrime {
    pub year: i32,
    /// Conditional mean of every tract × hour cell, tract-major.
    pub mean: Vec<f64>,
    pub counts: TractHourCounts,
}

#[derive(Debug, Clone)]
pub struct CrimeOutcome {
    /// Tract fixed effects, aligned with the kept tracts.
    pub alpha: Vec<f64>,
    /// Hour-of-week fixed effects.
    pub theta: Vec<f64>,
    /// Base year first, then one entry per feature year.
    pub years: Vec<YearCrime>,
    pub incidents: CrimeSet,
}

/// One draw from NB2 with mean `mu` and size `dispersion`; Poisson when `dispersion` is None.
pub fn sample_nb(rng: &mut impl Rng, mu: f64, dispersion: Option<f64>) -> u64 {
    let lambda = match dispersion {
        Some(size) if mu > 0.0 => Gamma::new(size, mu / size).expect("valid gamma").sample(rng),
        _ => mu,
    };
    if lambda > 0.0 {
        Poisson::new(lambda).expect("positive rate").sample(rng) as u64
    } else {
        0
    }
}

fn draw_crime_type(rng: &mut impl Rng) -> CrimeType {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, share) in CrimeType::ALL.into_iter().zip(CRIME_MIX) {
        acc += share;
        if u < acc {
            return c;
        }
    }
    CrimeType::VehicleTheft
}

fn cell_of(tracts: &TractSet, i: usize) -> (u32, u32) {
    let c = tracts.get(i).centroid;
    (c.lon.floor() as u32, c.lat.floor() as u32)
}

/// Crime for the base year and every feature year.
///
/// The base year follows the fixed effects alone and supplies past crime for the first feature
/// year. Each feature year adds the past-crime and mobility terms, with features taken from
/// `features` (aligned with `tracts`).
pub fn generate_crimes(cfg: &SynthConfig, tracts: &TractSet, features: &[YearFeatures]) -> Result<CrimeOutcome> {
    let n = tracts.len();
    let alpha: Vec<f64> = tracts
        .ids()
        .map(|id| {
            let mut rng = stream(cfg.seed, &[label("tract-effect"), label(id)]);
            cfg.sigma_alpha * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let mut rng = stream(cfg.seed, &[label("hour-effects")]);
    let theta: Vec<f64> = (0..HOURS_PER_WEEK)
        .map(|_| cfg.sigma_theta * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let c = &cfg.truth;
    let mut years: Vec<YearCrime> = Vec::with_capacity(features.len() + 1);
    for step in 0..=features.len() {
        let year = cfg.first_year + step as i32;
        let mut mean = Vec::with_capacity(n * HOURS_PER_WEEK);
        for i in 0..n {
            for t in 0..HOURS_PER_WEEK {
                let mut eta = c.nu + alpha[i] + theta[t];
                if step > 0 {
                    let f = &features[step - 1];
                    let m = &f.mobility;
                    eta += c.beta * years[step - 1].counts.get(i, t) as f64
                        + c.gamma * m.checkins.get(i, t) as f64
                        + c.delta * f.passthrough.get(i, t) as f64
                        + c.inout * m.inout.get(i, t) as f64
                        + c.selfloop * m.selfloop.get(i, t) as f64;
                }
                let mu = eta.exp();
                if !(mu <= cfg.max_mean) {
                    return Err(Error::Config(format!(
                        "expected crime count {mu:.4e} in tract {} hour {t} of {year} exceeds max_mean {}; \
                         lower the coefficients or the transition volume",
                        tracts.get(i).tract_id,
                        cfg.max_mean
                    )));
                }
                mean.push(mu);
            }
        }
        let rows: Vec<Vec<u64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(cfg.seed, &[label("crime-counts"), year as u64, label(&tracts.get(i).tract_id)]);
                (0..HOURS_PER_WEEK)
                    .map(|t| sample_nb(&mut rng, mean[i * HOURS_PER_WEEK + t], cfg.dispersion))
                    .collect()
            })
            .collect();
        let mut counts = TractHourCounts::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for (t, &k) in row.iter().enumerate() {
                counts.add(i, t, k);
            }
        }
        years.push(YearCrime { year, mean, counts });
    }

    let per_tract: Vec<Vec<CrimeIncident>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let id = &tracts.get(i).tract_id;
            let cell = cell_of(tracts, i);
            let mut out = Vec::new();
            for yc in &years {
                let mut rng = stream(cfg.seed, &[label("incidents"), yc.year as u64, label(id)]);
                for t in 0..HOURS_PER_WEEK {
                    for j in 0..yc.counts.get(i, t) {
                        out.push(CrimeIncident {
                            incident_id: format!("C{}_{}_{t:03}_{j}", yc.year, id),
                            ts: random_instant(&mut rng, yc.year, t),
                            location: random_point(&mut rng, cell),
                            crime_type: draw_crime_type(&mut rng),
                            tract_id: Some(id.clone()),
                        });
                    }
                }
            }
            out
        })
        .collect();
    let mut incidents: CrimeSet = per_tract.into_iter().flatten().collect();
    incidents.sort_by(|a, b| (a.ts, &a.incident_id).cmp(&(b.ts, &b.incident_id)));
    Ok(CrimeOutcome {
        alpha,
        theta,
        years,
        incidents,
    })
}
