use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureSet;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

/// Most bins per feature; features with more distinct values are cut at count quantiles.
pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Third,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Third => p / 3,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hold one sample.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    /// `u32::MAX` marks a leaf.
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0usize;
        loop {
            let n = &self.nodes[k];
            if n.feature == u32::MAX {
                return n.value;
            }
            k = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            let n = &t.nodes[k];
            if n.feature == u32::MAX {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub seed: u64,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, x: &FeatureSet) -> Vec<f64> {
        self.predict_prefix(x, self.trees.len())
    }

    /// Mean over the first `k` trees.
    pub fn predict_prefix(&self, x: &FeatureSet, k: usize) -> Vec<f64> {
        let k = k.min(self.trees.len()).max(1);
        (0..x.n())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let mut s = 0.0;
                for t in &self.trees[..k] {
                    s += t.predict_row(row);
                }
                s / k as f64
            })
            .collect()
    }
}

/// Per-feature split thresholds and the bin index of every training value.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// Column-major bin codes.
    codes: Vec<u8>,
    n: usize,
}

impl Binned {
    fn new(x: &FeatureSet) -> Binned {
        let (n, p) = (x.n(), x.p());
        let mut thresholds = Vec::with_capacity(p);
        let mut codes = vec![0u8; n * p];
        for j in 0..p {
            let mut vals: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            vals.sort_by(f64::total_cmp);
            let mut uniq: Vec<(f64, usize)> = Vec::new();
            for v in vals {
                match uniq.last_mut() {
                    Some((u, c)) if *u == v => *c += 1,
                    _ => uniq.push((v, 1)),
                }
            }
            let mut th = Vec::new();
            if uniq.len() <= MAX_BINS {
                for w in uniq.windows(2) {
                    th.push(w[0].0 + (w[1].0 - w[0].0) / 2.0);
                }
            } else {
                let mut cum = 0usize;
                let mut next = 1usize;
                for w in uniq.windows(2) {
                    cum += w[0].1;
                    if cum * MAX_BINS >= next * n {
                        th.push(w[0].0 + (w[1].0 - w[0].0) / 2.0);
                        while next * n <= cum * MAX_BINS {
                            next += 1;
                        }
                        if th.len() == MAX_BINS - 1 {
                            break;
                        }
                    }
                }
            }
            for i in 0..n {
                let v = x.get(i, j);
                codes[j * n + i] = th.partition_point(|&t| t < v) as u8;
            }
            thresholds.push(th);
        }
        Binned { thresholds, codes, n }
    }

    #[inline]
    fn code(&self, j: usize, i: usize) -> usize {
        self.codes[j * self.n + i] as usize
    }

    fn n_bins(&self, j: usize) -> usize {
        self.thresholds[j].len() + 1
    }
}

struct Split {
    feature: usize,
    bin: usize,
    score: f64,
}

fn best_split_for_feature(b: &Binned, y: &[f64], idx: &[usize], j: usize, scratch: &mut Vec<(u8, f64)>) -> Option<Split> {
    let nb = b.n_bins(j);
    if nb < 2 {
        return None;
    }
    let m = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<Split> = None;
    let consider = |bin: usize, nl: usize, sl: f64, best: &mut Option<Split>| {
        let nr = m - nl;
        if nl == 0 || nr == 0 {
            return;
        }
        let sr = total - sl;
        let score = sl * sl / nl as f64 + sr * sr / nr as f64;
        if best.as_ref().is_none_or(|s| score > s.score) {
            *best = Some(Split { feature: j, bin, score });
        }
    };
    if m * 4 < nb {
        scratch.clear();
        scratch.extend(idx.iter().map(|&i| (b.code(j, i) as u8, y[i])));
        scratch.sort_by_key(|e| e.0);
        if scratch[0].0 == scratch[m - 1].0 {
            return None;
        }
        let (mut nl, mut sl) = (0usize, 0.0);
        for k in 0..m - 1 {
            nl += 1;
            sl += scratch[k].1;
            if scratch[k].0 != scratch[k + 1].0 {
                consider(scratch[k].0 as usize, nl, sl, &mut best);
            }
        }
    } else {
        let mut cnt = [0usize; MAX_BINS];
        let mut sum = [0f64; MAX_BINS];
        for &i in idx {
            let c = b.code(j, i);
            cnt[c] += 1;
            sum[c] += y[i];
        }
        if cnt[..nb].iter().filter(|&&c| c > 0).count() < 2 {
            return None;
        }
        let (mut nl, mut sl) = (0usize, 0.0);
        for bin in 0..nb - 1 {
            nl += cnt[bin];
            sl += sum[bin];
            if cnt[bin] > 0 {
                consider(bin, nl, sl, &mut best);
            }
        }
    }
    best
}

fn build_tree(b: &Binned, y: &[f64], params: &ForestParams, seed: u64) -> Tree {
    let n = b.n;
    let p = b.thresholds.len();
    let mtry = params.max_features.resolve(p);
    let mut r = rng::stream(seed, &[]);
    let mut idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
    let mut nodes: Vec<Node> = vec![Node {
        feature: u32::MAX,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: 0.0,
    }];
    let mut stack = vec![(0usize, 0usize, n, 0usize)];
    let mut features: Vec<usize> = (0..p).collect();
    let mut scratch = Vec::new();
    while let Some((node, start, end, depth)) = stack.pop() {
        let slice = &idx[start..end];
        let m = slice.len();
        let total: f64 = slice.iter().map(|&i| y[i]).sum();
        nodes[node].value = total / m as f64;
        let first = y[slice[0]];
        let pure = slice.iter().all(|&i| y[i] == first);
        if pure || m < 2 || params.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        // Shuffle feature order; keep drawing past constant features like the usual CART forests do.
        for k in (1..p).rev() {
            let s = r.random_range(0..=k);
            features.swap(k, s);
        }
        let mut best: Option<Split> = None;
        let mut tried = 0;
        for &j in &features {
            if tried >= mtry {
                break;
            }
            if let Some(s) = best_split_for_feature(b, y, slice, j, &mut scratch) {
                tried += 1;
                if best.as_ref().is_none_or(|bs| s.score > bs.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { continue };
        let parent = total * total / m as f64;
        if split.score - parent <= 1e-12 * parent.abs().max(1e-300) {
            continue;
        }
        let slice = &mut idx[start..end];
        let mut lo = 0;
        for k in 0..slice.len() {
            if b.code(split.feature, slice[k]) <= split.bin {
                slice.swap(lo, k);
                lo += 1;
            }
        }
        let left = nodes.len();
        let leaf = Node {
            feature: u32::MAX,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: 0.0,
        };
        nodes.push(leaf);
        nodes.push(leaf);
        nodes[node].feature = split.feature as u32;
        nodes[node].threshold = b.thresholds[split.feature][split.bin];
        nodes[node].left = left as u32;
        nodes[node].right = left as u32 + 1;
        stack.push((left + 1, start + lo, end, depth + 1));
        stack.push((left, start, start + lo, depth + 1));
    }
    Tree { nodes }
}

/// Bootstrap regression forest; tree `k` uses a seed derived from (`seed`, k).
pub fn fit_random_forest(x: &FeatureSet, y: &[f64], params: ForestParams, seed: u64) -> Result<RandomForest> {
    if x.n() == 0 || x.n() != y.len() {
        return Err(Error::Validation(format!("{} feature rows for {} responses", x.n(), y.len())));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("random forest needs at least one tree".into()));
    }
    let binned = Binned::new(x);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|k| build_tree(&binned, y, &params, rng::derive_seed(seed, &[rng::label("tree"), k as u64])))
        .collect();
    Ok(RandomForest { params, seed, trees })
}
