use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// `None` when the actual values have zero variance.
    pub r2: Option<f64>,
}

pub fn evaluate(predictions: &[f64], actual: &[f64]) -> Result<Metrics> {
    if predictions.len() != actual.len() || actual.is_empty() {
        return Err(Error::Validation(format!(
            "cannot evaluate {} predictions against {} actual values",
            predictions.len(),
            actual.len()
        )));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let (mut sse, mut sae, mut sst) = (0.0, 0.0, 0.0);
    for (p, a) in predictions.iter().zip(actual) {
        let e = a - p;
        sse += e * e;
        sae += e.abs();
        sst += (a - mean) * (a - mean);
    }
    Ok(Metrics {
        mse: sse / n,
        mae: sae / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// Percent MSE reduction relative to a baseline.
pub fn improvement(mse_base: f64, mse_model: f64) -> Option<f64> {
    if mse_base == mse_model {
        Some(0.0)
    } else if mse_base > 0.0 {
        Some((mse_base - mse_model) / mse_base * 100.0)
    } else {
        None
    }
}

/// Extra crimes correctly placed per week by the better MAE, halved to stay conservative.
pub fn crimes_gained(mae_base: f64, mae_model: f64, n_tracts: usize, n_hours: usize) -> i64 {
    (n_hours as f64 * n_tracts as f64 * (mae_base - mae_model) / 2.0).round() as i64
}

pub fn squared_errors(predictions: &[f64], actual: &[f64]) -> Vec<f64> {
    predictions.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).collect()
}
