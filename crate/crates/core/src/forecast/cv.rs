use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::enet::{fit_path, predict_std, standardize};
use super::features::FeatureSet;
use super::forest::{fit_random_forest, ForestParams, MaxFeatures};
use crate::error::{Error, Result};
use crate::rng;

/// Shuffle rows with the seeded generator and deal them into `k` folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || n < 2 * k {
        return Err(Error::Config(format!("{k}-fold cross-validation needs at least {} rows, got {n}", 2 * k)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::label("cv-folds")]));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnGrid {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for EnGrid {
    fn default() -> Self {
        EnGrid {
            lambdas: (0..13).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect(),
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfGrid {
    pub n_trees: Vec<usize>,
    /// `None` means unlimited depth.
    pub max_depth: Vec<Option<usize>>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for RfGrid {
    fn default() -> Self {
        RfGrid {
            n_trees: vec![100, 300],
            max_depth: vec![Some(8), Some(16), None],
            max_features: vec![MaxFeatures::All, MaxFeatures::Sqrt, MaxFeatures::Third],
        }
    }
}

impl RfGrid {
    /// Small grid for single-machine runs.
    pub fn desk() -> Self {
        RfGrid {
            n_trees: vec![50],
            max_depth: vec![Some(8), Some(12)],
            max_features: vec![MaxFeatures::Third],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore<P> {
    pub params: P,
    pub cv_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnParams {
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection<P> {
    pub best: P,
    pub cv_mse: f64,
    pub folds_used: usize,
    pub grid: Vec<GridScore<P>>,
}

fn split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &g) in folds.iter().enumerate() {
        if g == f {
            test.push(i)
        } else {
            train.push(i)
        }
    }
    (train, test)
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, a)| (a - p) * (a - p)).sum::<f64>() / y.len() as f64
}

/// Folds whose training response is not constant; skipped folds are logged.
fn usable_folds(y: &[f64], folds: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for f in 0..k {
        let (train, test) = split(folds, f);
        let first = y[train[0]];
        if train.iter().all(|&i| y[i] == first) {
            warn!("fold {f}: constant training response, fold skipped");
            continue;
        }
        out.push((train, test));
    }
    out
}

fn pick<P: Clone>(grid: Vec<GridScore<P>>, folds_used: usize) -> Selection<P> {
    // Grid is in tie-break order; strict improvement keeps the earliest minimum.
    let mut best = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.cv_mse < grid[best].cv_mse {
            best = i;
        }
    }
    Selection {
        best: grid[best].params.clone(),
        cv_mse: grid[best].cv_mse,
        folds_used,
        grid,
    }
}

pub fn cv_elastic_net(x: &FeatureSet, y: &[f64], grid: &EnGrid, folds: &[usize], k: usize) -> Result<Selection<EnParams>> {
    if grid.lambdas.is_empty() || grid.alphas.is_empty() {
        return Err(Error::Config("elastic-net grid is empty".into()));
    }
    if grid.lambdas.iter().chain(&grid.alphas).any(|v| !v.is_finite() || *v < 0.0) || grid.alphas.iter().any(|a| *a > 1.0) {
        return Err(Error::Config("elastic-net grid needs λ ≥ 0 and α in [0, 1]".into()));
    }
    let mut lambdas = grid.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut alphas = grid.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let usable = usable_folds(y, folds, k);
    // sums[λ][α]
    let mut sums = vec![vec![0.0; alphas.len()]; lambdas.len()];
    for (train, test) in &usable {
        let xt = x.subset(train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = x.subset(test);
        let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let s = standardize(&xt, &yt);
        for (a, &alpha) in alphas.iter().enumerate() {
            for (l, b) in fit_path(&s, &lambdas, alpha).iter().enumerate() {
                sums[l][a] += mse(&predict_std(&s, b, &xv), &yv);
            }
        }
    }
    let used = usable.len().max(1) as f64;
    let mut scores = Vec::new();
    for (l, &lambda) in lambdas.iter().enumerate() {
        for (a, &alpha) in alphas.iter().enumerate() {
            scores.push(GridScore {
                params: EnParams { lambda, alpha },
                cv_mse: sums[l][a] / used,
            });
        }
    }
    Ok(pick(scores, usable.len()))
}

pub fn cv_random_forest(
    x: &FeatureSet,
    y: &[f64],
    grid: &RfGrid,
    folds: &[usize],
    k: usize,
    seed: u64,
) -> Result<Selection<ForestParams>> {
    if grid.n_trees.is_empty() || grid.max_depth.is_empty() || grid.max_features.is_empty() {
        return Err(Error::Config("random-forest grid is empty".into()));
    }
    let mut trees = grid.n_trees.clone();
    trees.sort_unstable();
    trees.dedup();
    if trees[0] == 0 {
        return Err(Error::Config("random-forest grid has a zero tree count".into()));
    }
    let mut depths = grid.max_depth.clone();
    depths.sort_by_key(|d| d.unwrap_or(usize::MAX));
    depths.dedup();
    let max_trees = *trees.last().unwrap();

    let usable = usable_folds(y, folds, k);
    let combos: Vec<(Option<usize>, MaxFeatures)> = depths
        .iter()
        .flat_map(|&d| grid.max_features.iter().map(move |&m| (d, m)))
        .collect();
    // sums[combo][trees]
    let mut sums = vec![vec![0.0; trees.len()]; combos.len()];
    for (f, (train, test)) in usable.iter().enumerate() {
        let xt = x.subset(train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = x.subset(test);
        let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        for (c, &(max_depth, max_features)) in combos.iter().enumerate() {
            let params = ForestParams {
                n_trees: max_trees,
                max_depth,
                max_features,
            };
            let fold_seed = rng::derive_seed(seed, &[rng::label("cv"), f as u64, c as u64]);
            let forest = fit_random_forest(&xt, &yt, params, fold_seed)?;
            for (t, &n_trees) in trees.iter().enumerate() {
                sums[c][t] += mse(&forest.predict_prefix(&xv, n_trees), &yv);
            }
        }
    }
    let used = usable.len().max(1) as f64;
    let mut scores = Vec::new();
    for (t, &n_trees) in trees.iter().enumerate() {
        for (c, &(max_depth, max_features)) in combos.iter().enumerate() {
            scores.push(GridScore {
                params: ForestParams {
                    n_trees,
                    max_depth,
                    max_features,
                },
                cv_mse: sums[c][t] / used,
            });
        }
    }
    Ok(pick(scores, usable.len()))
}
