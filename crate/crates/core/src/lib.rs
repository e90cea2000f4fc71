//! Mobility flows, pass-through routing, and crime models on census-tract networks.
//!
//! The crate turns venue-to-venue transitions into per-tract, per-hour-of-week
//! mobility features and fits two families of models on them:
//!
//! - [`ingest`]: parsing of tracts, venues, transitions and crime incidents,
//!   point-in-tract assignment and tract filtering.
//! - [`flownet`]: the spatial adjacency, origin-destination and shortest-path
//!   networks, and the per-tract pass-through counts derived from them.
//! - [`panel`]: the complete `tract × hour-of-week` feature panel.
//! - [`pglm`]: negative-binomial regression with tract and hour fixed effects,
//!   AIC tables and likelihood-ratio tests.
//! - [`forecast`]: historical baseline, elastic net and random forest
//!   forecasters with cross-validated hyperparameters, error metrics and the
//!   Wilcoxon signed-rank test.
//! - [`synth`]: a synthetic city with known ground truth that exercises the
//!   whole chain end to end.

pub mod error;
pub mod flownet;
pub mod forecast;
pub mod geometry;
pub mod ingest;
pub mod panel;
pub mod pglm;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Number of hours in the study horizon (one week).
pub const HOURS_PER_WEEK: usize = 168;

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
