use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSNR sampled at an increasing bitrate ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    bitrates_kbps: Vec<u32>,
    psnr_db: Vec<f64>,
}

impl RDCurve {
    pub fn new(bitrates_kbps: Vec<u32>, psnr_db: Vec<f64>) -> Result<Self> {
        if bitrates_kbps.len() != psnr_db.len() {
            return Err(Error::invalid(format!(
                "R-D curve has {} bitrates but {} PSNR values",
                bitrates_kbps.len(),
                psnr_db.len()
            )));
        }
        if bitrates_kbps.len() < 2 {
            return Err(Error::invalid("R-D curve needs at least two points"));
        }
        if bitrates_kbps[0] == 0 || bitrates_kbps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("R-D curve bitrates must be positive and strictly increasing"));
        }
        if let Some(p) = psnr_db.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::invalid(format!("R-D curve PSNR must be finite and positive, got {p}")));
        }
        Ok(RDCurve { bitrates_kbps, psnr_db })
    }

    pub fn bitrates_kbps(&self) -> &[u32] {
        &self.bitrates_kbps
    }

    pub fn psnr_db(&self) -> &[f64] {
        &self.psnr_db
    }

    pub fn len(&self) -> usize {
        self.psnr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr_db.is_empty()
    }
}

/// `psnr = a * ln(bitrate_kbps) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCurve {
    pub a: f64,
    pub b: f64,
}

impl LogCurve {
    pub fn eval(&self, bitrate_kbps: f64) -> Result<f64> {
        eval_curve(self, bitrate_kbps)
    }
}

pub fn eval_curve(curve: &LogCurve, bitrate_kbps: f64) -> Result<f64> {
    if !(bitrate_kbps > 0.0) {
        return Err(Error::invalid(format!("bitrate must be positive, got {bitrate_kbps}")));
    }
    Ok(curve.a * bitrate_kbps.ln() + curve.b)
}

/// Least-squares fit of a [`LogCurve`] to the points of `curve`.
pub fn fit_centroid(curve: &RDCurve) -> Result<LogCurve> {
    let rates: Vec<f64> = curve.bitrates_kbps.iter().map(|&r| r as f64).collect();
    fit_log_curve(&rates, &curve.psnr_db)
}

/// Closed-form normal equations for `psnr ~ a ln(rate) + b`, computed on
/// centred abscissae for conditioning.
pub fn fit_log_curve(bitrates_kbps: &[f64], psnr_db: &[f64]) -> Result<LogCurve> {
    if bitrates_kbps.len() != psnr_db.len() {
        return Err(Error::invalid("rate and PSNR slices differ in length"));
    }
    if bitrates_kbps.len() < 2 {
        return Err(Error::invalid("curve fit needs at least two points"));
    }
    if bitrates_kbps.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("curve fit needs positive bitrates"));
    }
    let n = bitrates_kbps.len() as f64;
    let xs: Vec<f64> = bitrates_kbps.iter().map(|r| r.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = psnr_db.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("curve fit needs at least two distinct bitrates"));
    }
    let sxy: f64 = xs.iter().zip(psnr_db).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let a = sxy / sxx;
    Ok(LogCurve { a, b: y_mean - a * x_mean })
}
