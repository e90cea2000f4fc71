use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) that gets the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W⁺, W⁻).
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Non-zero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
    /// Every difference was zero.
    pub degenerate: bool,
}

/// Ranks of the non-zero |d|, ties averaged, returned doubled so they are integers.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // Average of ranks i+1..=j+1, doubled.
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

struct Signed {
    ranks2: Vec<u64>,
    positive: Vec<bool>,
}

fn signed_ranks(a: &[f64], b: &[f64]) -> Result<Signed> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("unpaired samples: {} vs {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite difference in paired samples".into()));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    Ok(Signed {
        ranks2: doubled_ranks(&abs),
        positive: d.iter().map(|v| *v > 0.0).collect(),
    })
}

fn sums(s: &Signed) -> (u64, u64) {
    let plus: u64 = s.ranks2.iter().zip(&s.positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let total: u64 = s.ranks2.iter().sum();
    (plus, total - plus)
}

fn degenerate() -> WilcoxonResult {
    WilcoxonResult {
        statistic: 0.0,
        w_plus: 0.0,
        w_minus: 0.0,
        n: 0,
        p_value: 1.0,
        exact: true,
        degenerate: true,
    }
}

/// Two-sided p from the exact null distribution of W⁺ (sign of each rank a fair coin).
fn exact_p(ranks2: &[u64], w_min2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks2.len() as i32);
    let lower: f64 = counts[..=w_min2 as usize].iter().sum();
    (2.0 * lower / all).min(1.0)
}

fn normal_p(ranks2: &[u64], w_plus2: u64) -> f64 {
    let n = ranks2.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks2.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let dev = (w_plus2 as f64 / 2.0 - mean).abs() - 0.5;
    if dev <= 0.0 {
        return 1.0;
    }
    (2.0 * Normal::standard().sf(dev / var.sqrt())).min(1.0)
}

fn result(s: &Signed, exact: bool) -> WilcoxonResult {
    let (plus2, minus2) = sums(s);
    let p_value = if exact {
        exact_p(&s.ranks2, plus2.min(minus2))
    } else {
        normal_p(&s.ranks2, plus2)
    };
    WilcoxonResult {
        statistic: plus2.min(minus2) as f64 / 2.0,
        w_plus: plus2 as f64 / 2.0,
        w_minus: minus2 as f64 / 2.0,
        n: s.ranks2.len(),
        p_value,
        exact,
        degenerate: false,
    }
}

/// Wilcoxon signed-rank test on the paired differences `a − b`.
/// Exact for up to [`EXACT_MAX_N`] non-zero differences, normal approximation beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let s = signed_ranks(a, b)?;
    if s.ranks2.is_empty() {
        return Ok(degenerate());
    }
    Ok(result(&s, s.ranks2.len() <= EXACT_MAX_N))
}

pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let s = signed_ranks(a, b)?;
    if s.ranks2.is_empty() {
        return Ok(degenerate());
    }
    if s.ranks2.len() > 60 {
        return Err(Error::Validation("exact Wilcoxon distribution limited to 60 pairs".into()));
    }
    Ok(result(&s, true))
}

pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let s = signed_ranks(a, b)?;
    if s.ranks2.is_empty() {
        return Ok(degenerate());
    }
    Ok(result(&s, false))
}
