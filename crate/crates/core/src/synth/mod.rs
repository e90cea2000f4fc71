//! Synthetic city with a known data-generating process.
//!
//! Tracts are unit squares on a `width × height` grid. Venues, transitions and crime are drawn
//! from seeded streams, and the mobility features that drive crime are computed with the same
//! [`flownet`](crate::flownet) and [`panel`](crate::panel) code used on real data. The output
//! is the ingest file set plus a separate ground-truth document.

mod city;
mod crime;
mod output;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flownet::{build_od_network, build_queen_adjacency, pass_through_counts, AdjacencyNetwork, PassThroughCounts};
use crate::ingest::{annual_checkins, filter_tracts, FilterParams, TractSet, TransitionSet};
use crate::panel::{build_panel, mobility_counts, transitions_in_year, Covariates, MobilityCounts, Panel, PanelOptions, Provenance};
use crate::rng::{label, stream};

pub use city::{first_monday, generate_city, generate_transitions, hour_intensity, tract_id, City, ACTIVITY_MIX, CATEGORIES};
pub use crime::{generate_crimes, sample_nb, CrimeOutcome, YearCrime, CRIME_MIX};
pub use output::{GroundTruth, SynthFile, YearTruth};

/// Coefficients of the crime mean `exp(nu + alpha_i + theta_t + beta·past + gamma·checkins + ...)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrueCoefficients {
    pub nu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub inout: f64,
    pub selfloop: f64,
}

impl Default for TrueCoefficients {
    fn default() -> Self {
        TrueCoefficients {
            nu: -0.5,
            beta: 0.05,
            gamma: 0.01,
            delta: 0.02,
            inout: 0.0,
            selfloop: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Venues per tract, drawn uniformly from `venues_min..=venues_max`.
    pub venues_min: u32,
    pub venues_max: u32,
    pub population_min: u64,
    pub population_max: u64,
    /// Expected transitions per feature year.
    pub transitions_per_year: u64,
    /// Exponent of the hop-distance decay in destination choice.
    pub gravity: f64,
    /// Probability that a transition stays inside its origin tract.
    pub selfloop_share: f64,
    /// Log-scale spread of tract attractiveness.
    pub popularity_sigma: f64,
    /// Log-scale spread of the yearly tract × hour departure noise.
    pub hourly_noise_sigma: f64,
    /// Number of distinct user keys; defaults to one per twenty transitions.
    pub users: Option<u64>,
    /// Crime-only base year; feature years follow it.
    pub first_year: i32,
    pub feature_years: u32,
    pub truth: TrueCoefficients,
    pub sigma_alpha: f64,
    pub sigma_theta: f64,
    /// NB2 size parameter of crime counts; `None` draws Poisson counts.
    pub dispersion: Option<f64>,
    /// Largest admissible expected count in any cell.
    pub max_mean: f64,
    pub filter: FilterParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            width: 10,
            height: 5,
            venues_min: 4,
            venues_max: 12,
            population_min: 1_000,
            population_max: 8_000,
            transitions_per_year: 60_000,
            gravity: 1.5,
            selfloop_share: 0.25,
            popularity_sigma: 0.5,
            hourly_noise_sigma: 0.3,
            users: None,
            first_year: 2017,
            feature_years: 2,
            truth: TrueCoefficients::default(),
            sigma_alpha: 0.5,
            sigma_theta: 0.3,
            dispersion: Some(2.0),
            max_mean: 1e5,
            filter: FilterParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("synthetic city: {msg}")));
        if self.width == 0 || self.height == 0 || (self.width as u64) * (self.height as u64) < 4 {
            return bad(format!("grid {}x{} must have at least 4 tracts", self.width, self.height));
        }
        if self.width > 999 || self.height > 999 {
            return bad("grid sides are limited to 999 tracts".into());
        }
        if self.venues_min < 2 || self.venues_max < self.venues_min {
            return bad(format!(
                "venues per tract {}..={} must satisfy 2 <= min <= max",
                self.venues_min, self.venues_max
            ));
        }
        if self.population_max < self.population_min {
            return bad("population_max is below population_min".into());
        }
        let nonneg = [
            ("gravity", self.gravity),
            ("popularity_sigma", self.popularity_sigma),
            ("hourly_noise_sigma", self.hourly_noise_sigma),
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_theta", self.sigma_theta),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.selfloop_share) {
            return bad(format!("selfloop_share {} is outside [0, 1]", self.selfloop_share));
        }
        let t = &self.truth;
        for (name, v) in [
            ("nu", t.nu),
            ("beta", t.beta),
            ("gamma", t.gamma),
            ("delta", t.delta),
            ("inout", t.inout),
            ("selfloop", t.selfloop),
        ] {
            if !v.is_finite() {
                return bad(format!("coefficient {name} is not finite"));
            }
        }
        if let Some(d) = self.dispersion {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("dispersion must be positive and finite, got {d}"));
            }
        }
        if self.users == Some(0) {
            return bad("users must be positive".into());
        }
        if self.feature_years == 0 {
            return bad("at least one feature year is required".into());
        }
        if !(1900..=9000).contains(&self.first_year) {
            return bad(format!("first_year {} is out of range", self.first_year));
        }
        if !(self.max_mean > 0.0) {
            return bad("max_mean must be positive".into());
        }
        Ok(())
    }

    /// Years that carry transitions and the full crime model.
    pub fn feature_years(&self) -> impl Iterator<Item = i32> {
        let first = self.first_year + 1;
        first..first + self.feature_years as i32
    }
}

/// Mobility features of one year over the kept tracts.
#[derive(Debug, Clone)]
pub struct YearFeatures {
    pub year: i32,
    pub mobility: MobilityCounts,
    pub passthrough: PassThroughCounts,
}

/// Tract filtering, adjacency and per-year features, computed by the production pipeline.
///
/// Tracts are filtered on the check-ins of the first feature year.
pub fn compute_features(
    cfg: &SynthConfig,
    city: &City,
    transitions: &TransitionSet,
) -> Result<(TractSet, AdjacencyNetwork, Vec<YearFeatures>)> {
    let first = cfg.first_year + 1;
    let checkins = annual_checkins(transitions, &city.venues, Some(first));
    let kept = filter_tracts(&city.tracts, &checkins, cfg.filter)?;
    let adjacency = build_queen_adjacency(&kept)?;
    let features = cfg
        .feature_years()
        .map(|year| {
            let in_year = transitions_in_year(transitions, year);
            let (od, _) = build_od_network(&in_year, &city.venues, &kept);
            YearFeatures {
                year,
                mobility: mobility_counts(&in_year, &city.venues, &kept),
                passthrough: pass_through_counts(&adjacency, &od),
            }
        })
        .collect();
    Ok((kept, adjacency, features))
}

/// Per-tract socio-demographic indices, independent of the crime process.
fn generate_covariates(cfg: &SynthConfig, tracts: &TractSet) -> Covariates {
    let by_tract: BTreeMap<String, [f64; 3]> = tracts
        .ids()
        .map(|id| {
            let mut rng = stream(cfg.seed, &[label("covariates"), label(id)]);
            let mut v = [0.0; 3];
            v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            (id.to_string(), v)
        })
        .collect();
    Covariates::new(by_tract)
}

/// A fully generated city.
#[derive(Debug, Clone)]
pub struct SynthCity {
    pub config: SynthConfig,
    pub city: City,
    pub transitions: TransitionSet,
    /// Tracts surviving the population and check-in filter.
    pub kept: TractSet,
    pub adjacency: AdjacencyNetwork,
    pub features: Vec<YearFeatures>,
    pub crime: CrimeOutcome,
    pub covariates: Covariates,
}

/// Generate everything; a pure function of `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCity> {
    let city = generate_city(cfg)?;
    let transitions = generate_transitions(cfg, &city);
    let (kept, adjacency, features) = compute_features(cfg, &city, &transitions)?;
    let crime = generate_crimes(cfg, &kept, &features)?;
    let covariates = generate_covariates(cfg, &city.tracts);
    Ok(SynthCity {
        config: cfg.clone(),
        city,
        transitions,
        kept,
        adjacency,
        features,
        crime,
        covariates,
    })
}

impl SynthCity {
    pub fn feature_years(&self) -> Vec<i32> {
        self.features.iter().map(|f| f.year).collect()
    }

    pub fn features_for(&self, year: i32) -> Option<&YearFeatures> {
        self.features.iter().find(|f| f.year == year)
    }

    /// The panel of a feature year, assembled in memory by the production panel builder.
    pub fn panel(&self, year: i32, options: &PanelOptions, with_covariates: bool) -> Result<Panel> {
        let f = self
            .features_for(year)
            .ok_or_else(|| Error::Config(format!("{year} is not a feature year of this synthetic city")))?;
        let provenance = Provenance {
            filter: Some(self.config.filter),
            crime_types: options.crime_types.iter().map(|c| c.as_str().to_string()).collect(),
            ..Default::default()
        };
        let covariates = with_covariates.then_some(&self.covariates);
        let (panel, _) = build_panel(
            year,
            &self.kept,
            &self.city.venues,
            &self.transitions,
            &self.crime.incidents,
            &f.passthrough,
            covariates,
            options,
            provenance,
        )?;
        Ok(panel)
    }
}
