//! Crime forecasting: historical baseline, elastic net and random forest with cross-validation.

mod cv;
mod enet;
mod features;
mod forest;
mod metrics;
mod wilcoxon;

use std::io::Write;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng;

pub use cv::{cv_elastic_net, cv_random_forest, fold_assignment, EnGrid, EnParams, GridScore, RfGrid, Selection};
pub use enet::{fit_elastic_net, ElasticNet, EN_TOLERANCE};
pub use features::{feature_columns, FeatureSet, Variant};
pub use forest::{fit_random_forest, ForestParams, MaxFeatures, RandomForest, Tree, MAX_BINS};
pub use metrics::{crimes_gained, evaluate, improvement, squared_errors, Metrics};
pub use wilcoxon::{wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N};

/// The previous year's count at the same tract and hour.
pub fn historical_baseline(panel_eval: &Panel) -> Vec<f64> {
    panel_eval.rows().iter().map(|r| r.past_crime as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Historical,
    ElasticNet,
    RandomForest,
}

impl ModelKind {
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::Historical => "Historical",
            ModelKind::ElasticNet => "EN",
            ModelKind::RandomForest => "RF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub seed: u64,
    pub folds: usize,
    pub variants: Vec<Variant>,
    pub random_forest: bool,
    pub elastic_net: bool,
    /// Append the socio-demographic covariates to every variant.
    pub covariates: bool,
    pub en_grid: EnGrid,
    pub rf_grid: RfGrid,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            seed: 0,
            folds: 5,
            variants: Variant::ALL.to_vec(),
            random_forest: true,
            elastic_net: true,
            covariates: false,
            en_grid: EnGrid::default(),
            rf_grid: RfGrid::default(),
        }
    }
}

/// A fitted predictive model with the hyperparameters chosen by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Historical,
    ElasticNet { model: ElasticNet, selection: Selection<EnParams> },
    RandomForest { model: RandomForest, selection: Selection<ForestParams> },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Historical => ModelKind::Historical,
            TrainedModel::ElasticNet { .. } => ModelKind::ElasticNet,
            TrainedModel::RandomForest { .. } => ModelKind::RandomForest,
        }
    }
}

/// Cross-validate and refit an elastic net on the full training set.
pub fn train_elastic_net(x: &FeatureSet, y: &[f64], grid: &EnGrid, folds: usize, seed: u64) -> Result<TrainedModel> {
    let assignment = fold_assignment(x.n(), folds, seed)?;
    let selection = cv_elastic_net(x, y, grid, &assignment, folds)?;
    let model = fit_elastic_net(x, y, selection.best.lambda, selection.best.alpha);
    Ok(TrainedModel::ElasticNet { model, selection })
}

/// Cross-validate and refit a random forest on the full training set.
pub fn train_random_forest(x: &FeatureSet, y: &[f64], grid: &RfGrid, folds: usize, seed: u64) -> Result<TrainedModel> {
    let assignment = fold_assignment(x.n(), folds, seed)?;
    let selection = cv_random_forest(x, y, grid, &assignment, folds, seed)?;
    let model = fit_random_forest(x, y, selection.best, rng::derive_seed(seed, &[rng::label("final")]))?;
    Ok(TrainedModel::RandomForest { model, selection })
}

pub fn predict(model: &TrainedModel, x: &FeatureSet, panel_eval: &Panel) -> Vec<f64> {
    match model {
        TrainedModel::Historical => historical_baseline(panel_eval),
        TrainedModel::ElasticNet { model, .. } => model.predict(x),
        TrainedModel::RandomForest { model, .. } => model.predict(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    /// e.g. "RF (1b)".
    pub model: String,
    pub kind: ModelKind,
    pub variant: Option<Variant>,
    pub predictors: String,
    pub features: Vec<String>,
    pub hyperparameters: serde_json::Value,
    pub cv_mse: Option<f64>,
    pub metrics: Metrics,
    pub improvement_pct: Option<f64>,
    /// Crimes gained per week over the historical profile from the MAE difference.
    pub crimes_gained: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub kind: ModelKind,
    pub with_passthrough: Variant,
    pub without: Variant,
    pub mse_with: f64,
    pub mse_without: f64,
    /// Wilcoxon on per-observation squared errors (with − without).
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldInfo {
    pub folds: usize,
    pub seed: u64,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_year: i32,
    pub eval_year: i32,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_tracts: usize,
    pub seed: u64,
    pub cv: FoldInfo,
    pub models: Vec<ModelResult>,
    pub tests: Vec<PairTest>,
}

impl EvalReport {
    pub fn result(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.model == name)
    }

    pub fn historical(&self) -> &ModelResult {
        &self.models[0]
    }
}

/// Pairs compared by the signed-rank test: each pass-through variant against its reduced form.
pub const PAIRS: [(Variant, Variant); 2] = [(Variant::V1b, Variant::V1a), (Variant::V2b, Variant::V2a)];

pub fn prediction_suite(panel_train: &Panel, panel_eval: &Panel, cfg: &ForecastConfig) -> Result<EvalReport> {
    if panel_train.tract_ids() != panel_eval.tract_ids() {
        return Err(Error::Validation("training and evaluation panels cover different tracts".into()));
    }
    if cfg.covariates && !(panel_train.has_covariates() && panel_eval.has_covariates()) {
        return Err(Error::Config("covariates requested but the panels carry none".into()));
    }
    let y_train: Vec<f64> = panel_train.rows().iter().map(|r| r.crime as f64).collect();
    let y_eval: Vec<f64> = panel_eval.rows().iter().map(|r| r.crime as f64).collect();
    let n_tracts = panel_eval.n_tracts();

    let hist_pred = historical_baseline(panel_eval);
    let hist = evaluate(&hist_pred, &y_eval)?;
    let mut models = vec![ModelResult {
        model: "Historical".into(),
        kind: ModelKind::Historical,
        variant: None,
        predictors: "---".into(),
        features: vec!["past_crime".into()],
        hyperparameters: serde_json::Value::Null,
        cv_mse: None,
        metrics: hist,
        improvement_pct: improvement(hist.mse, hist.mse),
        crimes_gained: 0,
    }];

    let assignment = fold_assignment(panel_train.len(), cfg.folds, cfg.seed)?;
    let sizes = (0..cfg.folds).map(|f| assignment.iter().filter(|&&g| g == f).count()).collect();
    let mut kinds = Vec::new();
    if cfg.random_forest {
        kinds.push(ModelKind::RandomForest);
    }
    if cfg.elastic_net {
        kinds.push(ModelKind::ElasticNet);
    }

    let mut errors: Vec<(ModelKind, Variant, Vec<f64>, f64)> = Vec::new();
    for &kind in &kinds {
        for &variant in &cfg.variants {
            let cols = feature_columns(variant, cfg.covariates);
            let x_train = FeatureSet::from_panel(panel_train, &cols)?;
            let x_eval = FeatureSet::from_panel(panel_eval, &cols)?;
            let model_seed = rng::derive_seed(cfg.seed, &[rng::label(kind.short()), rng::label(variant.as_str())]);
            let (trained, cv_mse, hyper) = match kind {
                ModelKind::RandomForest => {
                    let sel = cv_random_forest(&x_train, &y_train, &cfg.rf_grid, &assignment, cfg.folds, model_seed)?;
                    let model =
                        fit_random_forest(&x_train, &y_train, sel.best, rng::derive_seed(model_seed, &[rng::label("final")]))?;
                    let hyper = serde_json::to_value(sel.best).expect("serializable");
                    let cv = sel.cv_mse;
                    (TrainedModel::RandomForest { model, selection: sel }, cv, hyper)
                }
                ModelKind::ElasticNet => {
                    let sel = cv_elastic_net(&x_train, &y_train, &cfg.en_grid, &assignment, cfg.folds)?;
                    let model = fit_elastic_net(&x_train, &y_train, sel.best.lambda, sel.best.alpha);
                    let hyper = serde_json::to_value(sel.best).expect("serializable");
                    let cv = sel.cv_mse;
                    (TrainedModel::ElasticNet { model, selection: sel }, cv, hyper)
                }
                ModelKind::Historical => unreachable!(),
            };
            let pred = predict(&trained, &x_eval, panel_eval);
            let m = evaluate(&pred, &y_eval)?;
            let name = format!("{} ({})", kind.short(), variant);
            info!("{name}: test MSE {:.4} (cv {:.4})", m.mse, cv_mse);
            models.push(ModelResult {
                model: name,
                kind,
                variant: Some(variant),
                predictors: variant.predictors().to_string(),
                features: cols,
                hyperparameters: hyper,
                cv_mse: Some(cv_mse),
                metrics: m,
                improvement_pct: improvement(hist.mse, m.mse),
                crimes_gained: crimes_gained(hist.mae, m.mae, n_tracts, crate::HOURS_PER_WEEK),
            });
            errors.push((kind, variant, squared_errors(&pred, &y_eval), m.mse));
        }
    }

    let mut tests = Vec::new();
    for &kind in &kinds {
        for (with, without) in PAIRS {
            let find = |v: Variant| errors.iter().find(|e| e.0 == kind && e.1 == v);
            if let (Some(a), Some(b)) = (find(with), find(without)) {
                tests.push(PairTest {
                    kind,
                    with_passthrough: with,
                    without,
                    mse_with: a.3,
                    mse_without: b.3,
                    wilcoxon: wilcoxon_signed_rank(&a.2, &b.2)?,
                });
            }
        }
    }

    Ok(EvalReport {
        train_year: panel_train.year,
        eval_year: panel_eval.year,
        n_train: panel_train.len(),
        n_eval: panel_eval.len(),
        n_tracts,
        seed: cfg.seed,
        cv: FoldInfo {
            folds: cfg.folds,
            seed: cfg.seed,
            sizes,
        },
        models,
        tests,
    })
}

/// Prediction table: Model, Predictors, MSE, Improvement%, MAE, R², Wilcoxon p.
pub fn write_eval_table<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = crate::ingest::csv_writer(out);
    let ctx = "writing prediction table";
    w.write_record(["Model", "Predictors", "MSE", "Improvement%", "MAE", "R2", "Wilcoxon p"])
        .map_err(|e| Error::csv(ctx, e))?;
    for m in &report.models {
        let p = m.variant.and_then(|v| {
            report
                .tests
                .iter()
                .find(|t| t.kind == m.kind && t.with_passthrough == v)
                .map(|t| t.wilcoxon.p_value)
        });
        w.write_record([
            m.model.clone(),
            m.predictors.clone(),
            format!("{:.4}", m.metrics.mse),
            m.improvement_pct.map_or("---".into(), |v| format!("{v:.2}")),
            format!("{:.4}", m.metrics.mae),
            m.metrics.r2.map_or("undefined".into(), |v| format!("{v:.4}")),
            p.map_or("---".into(), |v| format!("{v:.3e}")),
        ])
        .map_err(|e| Error::csv(ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(ctx, e))?;
    Ok(())
}
