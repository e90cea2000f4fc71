//! One module per subcommand, plus the fixed output layout they share.

pub mod explain;
pub mod features;
pub mod forecast;
pub mod ingest;
pub mod network;
pub mod report;
pub mod synth;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use crimeflow::ingest::Transition;

use crate::error::{CliError, Result};

pub const INGEST_DIR: &str = "ingest";
pub const NETWORK_DIR: &str = "network";
pub const FEATURES_DIR: &str = "features";
pub const EXPLAIN_DIR: &str = "explain";
pub const FORECAST_DIR: &str = "forecast";
pub const REPORT_DIR: &str = "report";
pub const SYNTH_DATA_DIR: &str = "synth/data";
pub const SYNTH_TRUTH_DIR: &str = "synth/ground_truth";

pub fn rel(dir: &str, file: &str) -> String {
    format!("{dir}/{file}")
}

/// Fail with an actionable message when an upstream artifact is absent.
pub fn require(path: PathBuf, what: &str, command: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::missing(what, command, path))
    }
}

pub fn transition_years(transitions: &[Transition]) -> Vec<i32> {
    transitions
        .iter()
        .map(|t| t.start_ts.year())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Years `y` for which `<dir>/<prefix><y><suffix>` exists.
pub fn years_on_disk(dir: &Path, prefix: &str, suffix: &str) -> Vec<i32> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut years: Vec<i32> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix(prefix)?.strip_suffix(suffix)?.parse().ok()
        })
        .collect();
    years.sort_unstable();
    years
}

pub fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("settings serialize to JSON")
}

/// Delete `<dir>/<prefix><y><suffix>` files for years not in `keep`, left by earlier runs.
pub fn prune_years(dir: &Path, prefix: &str, suffix: &str, keep: &[i32]) -> Result<()> {
    for year in years_on_disk(dir, prefix, suffix) {
        if !keep.contains(&year) {
            let path = dir.join(format!("{prefix}{year}{suffix}"));
            std::fs::remove_file(&path).map_err(|e| CliError::io(format!("removing {}", path.display()), e))?;
        }
    }
    Ok(())
}
