//! Negative-binomial panel regression with tract and hour fixed effects.

mod design;
mod fit;
pub mod nb;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::panel::{Panel, ACTIVITY_COLUMNS};

pub use design::{aliased_columns, build_design, Design, ModelSpec};
pub use fit::{fit_nb_pglm, log_likelihood, score, FitOptions, PGLMFit};

/// Likelihood-ratio test of a nested model against a fuller one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub full: String,
    pub nested: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn lr_test(full: &PGLMFit, nested: &PGLMFit) -> Result<LrTest> {
    let (f, n) = (&full.spec, &nested.spec);
    let same_frame = f.response == n.response
        && f.tract_effects == n.tract_effects
        && f.hour_effects == n.hour_effects
        && full.n_obs == nested.n_obs;
    if !same_frame || !n.regressors.iter().all(|r| f.regressors.contains(r)) {
        return Err(Error::Config(format!("{} is not nested in {}", n.name, f.name)));
    }
    let df = full.coefficients.len().saturating_sub(nested.coefficients.len());
    let statistic = (2.0 * (full.log_likelihood - nested.log_likelihood)).max(0.0);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).expect("df > 0").sf(statistic)
    };
    Ok(LrTest {
        full: f.name.clone(),
        nested: n.name.clone(),
        statistic,
        df,
        p_value,
    })
}

/// Percent change in expected crime per `scale` units of a regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Irr {
    pub regressor: String,
    pub scale: f64,
    pub coefficient: f64,
    pub std_error: f64,
    pub rate_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub percent_change: f64,
}

pub const IRR_SCALE: f64 = 100.0;

pub fn irr(fit: &PGLMFit, regressor: &str, scale: f64) -> Result<Irr> {
    let (b, se) = fit
        .coefficient(regressor)
        .ok_or_else(|| Error::Config(format!("{regressor:?} is not a coefficient of {}", fit.spec.name)))?;
    Ok(irr_from(regressor, b, se, scale))
}

pub fn irr_from(regressor: &str, coefficient: f64, std_error: f64, scale: f64) -> Irr {
    let z = 1.959963984540054;
    let rate_ratio = (scale * coefficient).exp();
    Irr {
        regressor: regressor.to_string(),
        scale,
        coefficient,
        std_error,
        rate_ratio,
        ci_low: (scale * (coefficient - z * std_error)).exp(),
        ci_high: (scale * (coefficient + z * std_error)).exp(),
        percent_change: (rate_ratio - 1.0) * 100.0,
    }
}

pub const BASELINE: &str = "baseline";

/// The five nested specifications compared in the model table.
pub fn suite_specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new(BASELINE, &["past_crime"]),
        ModelSpec::new("1a", &["past_crime", "checkins"]),
        ModelSpec::new("1b", &["past_crime", "checkins", "passthrough_flow"]),
        ModelSpec::new("2a", &["past_crime", "inout_flow", "selfloop_flow"]),
        ModelSpec::new("2b", &["past_crime", "inout_flow", "selfloop_flow", "passthrough_flow"]),
    ]
}

/// Check-ins split by activity type next to pass-through flow.
pub fn activity_spec() -> ModelSpec {
    let mut regs = vec!["past_crime"];
    regs.extend(ACTIVITY_COLUMNS);
    regs.push("passthrough_flow");
    ModelSpec::new("activity", &regs)
}

pub const SUITE_TESTS: [(&str, &str); 3] = [("1a", BASELINE), ("1b", "1a"), ("2b", "2a")];

/// Append extra regressors (e.g. covariates) to every spec; aliased columns are dropped.
pub fn with_extra_regressors(specs: Vec<ModelSpec>, extra: &[&str]) -> Vec<ModelSpec> {
    specs
        .into_iter()
        .map(|mut s| {
            s.regressors.extend(extra.iter().map(|e| e.to_string()));
            s.drop_aliased = true;
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSuite {
    pub fits: Vec<PGLMFit>,
    pub lr_tests: Vec<LrTest>,
}

impl ModelSuite {
    pub fn fit(&self, name: &str) -> Option<&PGLMFit> {
        self.fits.iter().find(|f| f.spec.name == name)
    }

    /// Model with the smallest AIC.
    pub fn best(&self) -> Option<&PGLMFit> {
        self.fits.iter().min_by(|a, b| a.aic.total_cmp(&b.aic))
    }
}

/// Fit `specs` (in parallel) and run the standard LR tests among those present.
pub fn model_suite(panel: &Panel, specs: &[ModelSpec], options: FitOptions) -> Result<ModelSuite> {
    let fits = specs
        .par_iter()
        .map(|s| fit_nb_pglm(panel, s, options))
        .collect::<Result<Vec<_>>>()?;
    let mut suite = ModelSuite {
        fits,
        lr_tests: Vec::new(),
    };
    for (full, nested) in SUITE_TESTS {
        if let (Some(f), Some(n)) = (suite.fit(full), suite.fit(nested)) {
            let t = lr_test(f, n)?;
            suite.lr_tests.push(t);
        }
    }
    Ok(suite)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub response: String,
    pub regressors: Vec<String>,
    pub n_obs: usize,
    pub n_params: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub dispersion: f64,
    pub dispersion_se: Option<f64>,
    pub poisson_limit: bool,
    pub converged: bool,
    pub iterations: usize,
    pub aliased: Vec<String>,
    pub irr_per_100: Vec<Irr>,
    pub coefficients: Vec<CoefficientReport>,
}

impl FitReport {
    pub fn new(fit: &PGLMFit) -> Self {
        let normal = Normal::standard();
        let z95 = 1.959963984540054;
        let coefficients = fit
            .columns
            .iter()
            .zip(fit.coefficients.iter().zip(&fit.standard_errors))
            .map(|(name, (&b, &se))| {
                let z = b / se;
                CoefficientReport {
                    name: name.clone(),
                    estimate: b,
                    std_error: se,
                    z,
                    p_value: 2.0 * normal.sf(z.abs()),
                    ci_low: b - z95 * se,
                    ci_high: b + z95 * se,
                }
            })
            .collect();
        let irr_per_100 = fit
            .spec
            .regressors
            .iter()
            .filter_map(|r| irr(fit, r, IRR_SCALE).ok())
            .collect();
        FitReport {
            model: fit.spec.name.clone(),
            response: fit.spec.response.clone(),
            regressors: fit.spec.regressors.clone(),
            n_obs: fit.n_obs,
            n_params: fit.n_params(),
            log_likelihood: fit.log_likelihood,
            aic: fit.aic,
            dispersion: fit.dispersion,
            dispersion_se: fit.dispersion_se,
            poisson_limit: fit.poisson_limit,
            converged: fit.converged,
            iterations: fit.iterations,
            aliased: fit.aliased.clone(),
            irr_per_100,
            coefficients,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub best_model: Option<String>,
    pub models: Vec<FitReport>,
    pub lr_tests: Vec<LrTest>,
}

impl SuiteReport {
    pub fn new(suite: &ModelSuite) -> Self {
        SuiteReport {
            best_model: suite.best().map(|f| f.spec.name.clone()),
            models: suite.fits.iter().map(FitReport::new).collect(),
            lr_tests: suite.lr_tests.clone(),
        }
    }
}

fn regressor_label(name: &str) -> &str {
    match name {
        "past_crime" => "Past crime",
        "checkins" => "check-ins",
        "passthrough_flow" => "pass-through flow",
        "inout_flow" => "incoming/outgoing flow",
        "selfloop_flow" => "self-loop flow",
        other => other,
    }
}

/// Model-comparison table: one row per model with its regressors, log-likelihood and AIC.
pub fn write_aic_table<W: Write>(suite: &ModelSuite, out: W) -> Result<()> {
    let mut w = crate::ingest::csv_writer(out);
    let ctx = "writing AIC table";
    let best = suite.best().map(|f| f.spec.name.clone());
    w.write_record([
        "model",
        "regressors",
        "log_likelihood",
        "aic",
        "n_params",
        "dispersion",
        "converged",
        "best",
    ])
    .map_err(|e| Error::csv(ctx, e))?;
    for f in &suite.fits {
        let regs: Vec<&str> = f.spec.regressors.iter().map(|r| regressor_label(r)).collect();
        w.write_record([
            f.spec.name.clone(),
            regs.join(", "),
            format!("{:.4}", f.log_likelihood),
            format!("{:.2}", f.aic),
            f.n_params().to_string(),
            format!("{:.6e}", f.dispersion),
            f.converged.to_string(),
            (best.as_deref() == Some(&f.spec.name)).to_string(),
        ])
        .map_err(|e| Error::csv(ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(ctx, e))?;
    Ok(())
}
