use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{for_each_csv_row, TractSet};

pub const COVARIATE_COLUMNS: [&str; 3] = [
    "concentrated_disadvantage",
    "residential_stability",
    "ethnic_heterogeneity",
];

/// Precomputed per-tract socio-demographic indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Covariates {
    by_tract: BTreeMap<String, [f64; 3]>,
}

impl Covariates {
    pub fn new(by_tract: BTreeMap<String, [f64; 3]>) -> Self {
        Covariates { by_tract }
    }

    pub fn get(&self, tract_id: &str) -> Option<[f64; 3]> {
        self.by_tract.get(tract_id).copied()
    }

    pub fn len(&self) -> usize {
        self.by_tract.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tract.is_empty()
    }

    /// Values aligned with `tracts`; every tract must be covered.
    pub fn for_tracts(&self, tracts: &TractSet) -> Result<Vec<[f64; 3]>> {
        let missing: Vec<&str> = tracts.ids().filter(|id| !self.by_tract.contains_key(*id)).collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "covariates missing for {} tract(s): {}",
                missing.len(),
                missing.join(", ")
            )));
        }
        Ok(tracts.ids().map(|id| self.by_tract[id]).collect())
    }
}

#[derive(Deserialize)]
struct Row {
    tract_id: String,
    concentrated_disadvantage: f64,
    residential_stability: f64,
    ethnic_heterogeneity: f64,
}

pub fn parse_covariates(path: &Path) -> Result<Covariates> {
    let mut required = vec!["tract_id"];
    required.extend(COVARIATE_COLUMNS);
    let mut by_tract = BTreeMap::new();
    for_each_csv_row(path, &required, |line, r: Row| {
        let v = [r.concentrated_disadvantage, r.residential_stability, r.ethnic_heterogeneity];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(path, line, "covariate values must be finite"));
        }
        if by_tract.insert(r.tract_id.clone(), v).is_some() {
            return Err(Error::parse(path, line, format!("duplicate tract_id {}", r.tract_id)));
        }
        Ok(())
    })?;
    Ok(Covariates { by_tract })
}
