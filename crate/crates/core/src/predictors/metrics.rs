use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub mse: f64,
    pub r2: f64,
    pub mape: f64,
}

/// MAE, MSE, R² and MAPE (as a fraction, not a percentage).
///
/// R² follows the usual convention for a constant target: 1 for a perfect
/// fit, 0 otherwise.
pub fn regression_metrics(predicted: &[f64], actual: &[f64]) -> Result<RegressionMetrics> {
    if predicted.is_empty() || predicted.len() != actual.len() {
        return Err(Error::invalid("metrics need equal, non-zero lengths"));
    }
    if actual.contains(&0.0) {
        return Err(Error::invalid("MAPE is undefined for a zero actual value"));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let (mut abs, mut sq, mut pct, mut tot) = (0.0, 0.0, 0.0, 0.0);
    for (p, a) in predicted.iter().zip(actual) {
        let e = p - a;
        abs += e.abs();
        sq += e * e;
        pct += (e / a).abs();
        tot += (a - mean) * (a - mean);
    }
    let r2 = if tot > 0.0 {
        1.0 - sq / tot
    } else if sq == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(RegressionMetrics {
        mae: abs / n,
        mse: sq / n,
        r2,
        mape: pct / n,
    })
}

pub fn mape(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    regression_metrics(predicted, actual).map(|m| m.mape)
}
