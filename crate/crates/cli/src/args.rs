use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "crimeflow", version, about = "Mobility flows, pass-through routing and crime models on census tracts")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "CRIMEFLOW_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, env = "CRIMEFLOW_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true, env = "CRIMEFLOW_THREADS")]
    pub threads: Option<usize>,
    /// IANA timezone of naive timestamps in the inputs (default UTC).
    #[arg(long, global = true, env = "CRIMEFLOW_TZ")]
    pub tz: Option<String>,
    /// Root of all outputs (default `out`).
    #[arg(long, global = true, env = "CRIMEFLOW_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate raw inputs, assign tracts, filter tracts.
    Ingest(IngestArgs),
    /// Spatial, origin-destination and shortest-path networks.
    Network {
        #[command(subcommand)]
        command: NetworkCommand,
    },
    /// Tract × hour-of-week panels.
    Features {
        #[command(subcommand)]
        command: FeaturesCommand,
    },
    /// Negative-binomial fixed-effects model suite.
    Explain(ExplainArgs),
    /// Forecasting suite: historical profile, random forest, elastic net.
    Forecast(ForecastArgs),
    /// Synthetic city with known ground truth.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Text tables and plot-ready exports from earlier results.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum NetworkCommand {
    Build(NetworkArgs),
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    Build(FeaturesArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    Generate(SynthArgs),
}

/// `--flag` / `--no-flag` pair resolved to an optional override.
fn toggle(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding tracts.geojson, venues.csv, category_map.csv, transitions.csv
    /// (or checkins.csv), crimes.csv and optionally covariates.csv.
    #[arg(long, env = "CRIMEFLOW_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub tracts: Option<PathBuf>,
    #[arg(long)]
    pub venues: Option<PathBuf>,
    #[arg(long)]
    pub category_map: Option<PathBuf>,
    #[arg(long, conflicts_with = "checkins")]
    pub transitions: Option<PathBuf>,
    /// Raw check-ins `user_key,ts,venue_id`, paired into transitions.
    #[arg(long)]
    pub checkins: Option<PathBuf>,
    #[arg(long)]
    pub crimes: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long)]
    pub pop_min: Option<u64>,
    #[arg(long)]
    pub checkin_min: Option<u64>,
    /// Year whose check-ins drive the tract filter (default: first year with transitions).
    #[arg(long)]
    pub filter_year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Custom adjacency edge list replacing queen contiguity.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Restrict crime counts to these types (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub crime_types: Option<Vec<String>>,
    /// Include check-ins split by activity type (default on).
    #[arg(long, overrides_with = "no_activity")]
    pub activity: bool,
    #[arg(long)]
    pub no_activity: bool,
}

impl FeaturesArgs {
    pub fn activity(&self) -> Option<bool> {
        toggle(self.activity, self.no_activity)
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Panel year (default: the forecasting training year).
    #[arg(long)]
    pub year: Option<i32>,
    /// Also fit the activity-type specification.
    #[arg(long, overrides_with = "no_activity")]
    pub activity: bool,
    #[arg(long)]
    pub no_activity: bool,
    /// Append the socio-demographic covariates to every specification.
    #[arg(long, overrides_with = "no_covariates")]
    pub covariates: bool,
    #[arg(long)]
    pub no_covariates: bool,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl ExplainArgs {
    pub fn activity(&self) -> Option<bool> {
        toggle(self.activity, self.no_activity)
    }

    pub fn covariates(&self) -> Option<bool> {
        toggle(self.covariates, self.no_covariates)
    }
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub train_year: Option<i32>,
    #[arg(long)]
    pub eval_year: Option<i32>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Hyperparameter grid: `full` or the reduced `desk` grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// Variants to run, e.g. `1a,1b` (default all four).
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long)]
    pub no_random_forest: bool,
    #[arg(long)]
    pub no_elastic_net: bool,
    #[arg(long, overrides_with = "no_covariates")]
    pub covariates: bool,
    #[arg(long)]
    pub no_covariates: bool,
}

impl ForecastArgs {
    pub fn covariates(&self) -> Option<bool> {
        toggle(self.covariates, self.no_covariates)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Expected transitions per feature year.
    #[arg(long)]
    pub transitions: Option<u64>,
    #[arg(long)]
    pub gravity: Option<f64>,
    /// True check-in coefficient.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// True pass-through coefficient.
    #[arg(long)]
    pub delta: Option<f64>,
    /// NB size parameter of crime counts.
    #[arg(long, conflicts_with = "poisson")]
    pub dispersion: Option<f64>,
    /// Draw Poisson crime counts.
    #[arg(long)]
    pub poisson: bool,
    /// Crime-only base year; feature years follow.
    #[arg(long)]
    pub first_year: Option<i32>,
    #[arg(long)]
    pub feature_years: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {}
