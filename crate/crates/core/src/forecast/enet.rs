use serde::{Deserialize, Serialize};

use super::features::FeatureSet;

pub const EN_TOLERANCE: f64 = 1e-7;
const MAX_SWEEPS: usize = 100_000;

/// Linear model fitted on standardized features; predicts on raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNet {
    pub lambda: f64,
    pub alpha: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Coefficients on the standardized scale.
    pub coef_std: Vec<f64>,
    pub y_mean: f64,
}

impl ElasticNet {
    /// Coefficients on the raw feature scale and the matching intercept.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        let coef: Vec<f64> = self
            .coef_std
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        let intercept = self.y_mean - coef.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (intercept, coef)
    }

    pub fn predict(&self, x: &FeatureSet) -> Vec<f64> {
        (0..x.n())
            .map(|i| {
                let mut v = self.y_mean;
                for (j, &xv) in x.row(i).iter().enumerate() {
                    if self.scales[j] > 0.0 {
                        v += self.coef_std[j] * (xv - self.means[j]) / self.scales[j];
                    }
                }
                v
            })
            .collect()
    }
}

/// Sufficient statistics of a standardized training set.
pub(crate) struct Standardized {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Z'Z / n.
    pub gram: Vec<f64>,
    /// Z'(y − ȳ) / n.
    pub zty: Vec<f64>,
    pub y_mean: f64,
}

pub(crate) fn standardize(x: &FeatureSet, y: &[f64]) -> Standardized {
    let (n, p) = (x.n(), x.p());
    let nf = n as f64;
    let mut means = vec![0.0; p];
    for i in 0..n {
        for (m, v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut var = vec![0.0; p];
    let mut gram = vec![0.0; p * p];
    let mut zty = vec![0.0; p];
    let mut c = vec![0.0; p];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            c[j] = v - means[j];
        }
        let yc = y[i] - y_mean;
        for a in 0..p {
            var[a] += c[a] * c[a];
            zty[a] += c[a] * yc;
            for b in a..p {
                gram[a * p + b] += c[a] * c[b];
            }
        }
    }
    let scales: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / nf).sqrt();
            if s > 1e-12 {
                s
            } else {
                0.0
            }
        })
        .collect();
    for a in 0..p {
        for b in a..p {
            let g = if scales[a] > 0.0 && scales[b] > 0.0 {
                gram[a * p + b] / (nf * scales[a] * scales[b])
            } else {
                0.0
            };
            gram[a * p + b] = g;
            gram[b * p + a] = g;
        }
        zty[a] = if scales[a] > 0.0 { zty[a] / (nf * scales[a]) } else { 0.0 };
    }
    Standardized {
        means,
        scales,
        gram,
        zty,
        y_mean,
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Coordinate descent on `1/(2n)‖y − Zb‖² + λ(α‖b‖₁ + (1−α)/2 ‖b‖²)`, warm-started from `b`.
pub(crate) fn coordinate_descent(s: &Standardized, lambda: f64, alpha: f64, b: &mut [f64]) {
    let p = b.len();
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    for _ in 0..MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if s.scales[j] == 0.0 {
                b[j] = 0.0;
                continue;
            }
            let gjj = s.gram[j * p + j];
            let mut rho = s.zty[j];
            for k in 0..p {
                if k != j {
                    rho -= s.gram[j * p + k] * b[k];
                }
            }
            let new = soft_threshold(rho, l1) / (gjj + l2);
            max_delta = max_delta.max((new - b[j]).abs());
            b[j] = new;
        }
        if max_delta < EN_TOLERANCE {
            break;
        }
    }
}

pub fn fit_elastic_net(x: &FeatureSet, y: &[f64], lambda: f64, alpha: f64) -> ElasticNet {
    let s = standardize(x, y);
    let mut b = vec![0.0; x.p()];
    coordinate_descent(&s, lambda, alpha, &mut b);
    ElasticNet {
        lambda,
        alpha,
        means: s.means,
        scales: s.scales,
        coef_std: b,
        y_mean: s.y_mean,
    }
}

/// Models for every λ (fitted largest first with warm starts) at one α.
pub(crate) fn fit_path(s: &Standardized, lambdas: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out = vec![Vec::new(); lambdas.len()];
    let mut b = vec![0.0; s.means.len()];
    for k in order {
        coordinate_descent(s, lambdas[k], alpha, &mut b);
        out[k] = b.clone();
    }
    out
}

pub(crate) fn predict_std(s: &Standardized, b: &[f64], x: &FeatureSet) -> Vec<f64> {
    ElasticNet {
        lambda: 0.0,
        alpha: 0.0,
        means: s.means.clone(),
        scales: s.scales.clone(),
        coef_std: b.to_vec(),
        y_mean: s.y_mean,
    }
    .predict(x)
}
