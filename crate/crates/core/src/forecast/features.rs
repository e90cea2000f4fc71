use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, COVARIATE_COLUMNS};

/// Mobility feature sets compared in the prediction table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "1a")]
    V1a,
    #[serde(rename = "1b")]
    V1b,
    #[serde(rename = "2a")]
    V2a,
    #[serde(rename = "2b")]
    V2b,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::V1a, Variant::V1b, Variant::V2a, Variant::V2b];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::V1a => "1a",
            Variant::V1b => "1b",
            Variant::V2a => "2a",
            Variant::V2b => "2b",
        }
    }

    pub fn mobility_columns(self) -> &'static [&'static str] {
        match self {
            Variant::V1a => &["checkins"],
            Variant::V1b => &["checkins", "passthrough_flow"],
            Variant::V2a => &["inout_flow", "selfloop_flow"],
            Variant::V2b => &["inout_flow", "selfloop_flow", "passthrough_flow"],
        }
    }

    /// Human-readable predictor list for tables.
    pub fn predictors(self) -> &'static str {
        match self {
            Variant::V1a => "Past crime, check-ins",
            Variant::V1b => "Past crime, check-ins, pass-through flow",
            Variant::V2a => "Past crime, incoming/outgoing flow, self-loop flow",
            Variant::V2b => "Past crime, incoming/outgoing flow, self-loop flow, pass-through flow",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected 1a, 1b, 2a or 2b")))
    }
}

/// Feature names in their fixed order.
pub fn feature_columns(variant: Variant, covariates: bool) -> Vec<String> {
    let mut cols = vec!["past_crime"];
    cols.extend(variant.mobility_columns());
    cols.extend(["x", "y", "t", "weekend"]);
    if covariates {
        cols.extend(COVARIATE_COLUMNS);
    }
    cols.into_iter().map(String::from).collect()
}

/// Row-major predictor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub names: Vec<String>,
    n: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Validation("feature rows of unequal length".into()));
        }
        Ok(FeatureSet {
            names,
            n: rows.len(),
            data: rows.concat(),
        })
    }

    pub fn from_panel(panel: &Panel, columns: &[String]) -> Result<Self> {
        let n = panel.len();
        let p = columns.len();
        let mut data = vec![0.0; n * p];
        for (j, name) in columns.iter().enumerate() {
            if name == "crime" {
                return Err(Error::Config("the response cannot be a predictor".into()));
            }
            let col = panel
                .column(name)
                .ok_or_else(|| Error::Config(format!("feature column {name:?} not in panel")))?;
            for (i, v) in col.into_iter().enumerate() {
                data[i * p + j] = v;
            }
        }
        Ok(FeatureSet {
            names: columns.to_vec(),
            n,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.data[i * p..(i + 1) * p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p() + j]
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureSet {
        let p = self.p();
        let mut data = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureSet {
            names: self.names.clone(),
            n: rows.len(),
            data,
        }
    }
}
