use crate::error::{Error, Result};
use crate::rdmodel::RDCurve;

/// log10(rate) as a cubic in standardised PSNR, s = (psnr - center) / width.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogRateCubic {
    coef: [f64; 4],
    center: f64,
    width: f64,
}

impl LogRateCubic {
    pub(crate) fn fit(rates: &[f64], psnr: &[f64]) -> Result<Self> {
        if rates.len() != psnr.len() {
            return Err(Error::invalid("rate and PSNR lists differ in length"));
        }
        if rates.len() < 4 {
            return Err(Error::invalid("BD-rate needs at least 4 points per curve"));
        }
        if rates.iter().chain(psnr).any(|v| !v.is_finite()) || rates.iter().any(|&r| r <= 0.0) {
            return Err(Error::invalid("BD-rate needs finite PSNR and positive rates"));
        }
        let lo = psnr.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = psnr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(Error::invalid("BD-rate curve has a single PSNR value"));
        }
        let center = 0.5 * (lo + hi);
        let width = 0.5 * (hi - lo);
        // Normal equations for least squares on [1, s, s^2, s^3].
        let mut a = [[0.0f64; 5]; 4];
        for (&r, &p) in rates.iter().zip(psnr) {
            let s = (p - center) / width;
            let basis = [1.0, s, s * s, s * s * s];
            let y = r.log10();
            for row in 0..4 {
                for col in 0..4 {
                    a[row][col] += basis[row] * basis[col];
                }
                a[row][4] += basis[row] * y;
            }
        }
        let coef = solve4(a).ok_or_else(|| Error::invalid("BD-rate fit is singular; need 4 distinct PSNR values"))?;
        Ok(LogRateCubic { coef, center, width })
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn eval(&self, psnr: f64) -> f64 {
        let s = (psnr - self.center) / self.width;
        ((self.coef[3] * s + self.coef[2]) * s + self.coef[1]) * s + self.coef[0]
    }

    /// ∫ eval(p) dp over [lo, hi].
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |p: f64| {
            let s = (p - self.center) / self.width;
            let c = &self.coef;
            self.width * s * (c[0] + s * (c[1] / 2.0 + s * (c[2] / 3.0 + s * c[3] / 4.0)))
        };
        anti(hi) - anti(lo)
    }
}

/// Gaussian elimination with partial pivoting on a 4x4 augmented system.
fn solve4(mut a: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][4] - tail) / a[row][row];
    }
    Some(x)
}

fn psnr_range(psnr: &[f64]) -> (f64, f64) {
    let lo = psnr.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = psnr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// BD-rate in percent of `test` against `anchor`, given as raw (rate, PSNR)
/// samples. Negative means the test curve needs less rate for equal PSNR.
pub fn bd_rate_points(anchor_rates: &[f64], anchor_psnr: &[f64], test_rates: &[f64], test_psnr: &[f64]) -> Result<f64> {
    let fa = LogRateCubic::fit(anchor_rates, anchor_psnr)?;
    let ft = LogRateCubic::fit(test_rates, test_psnr)?;
    let (alo, ahi) = psnr_range(anchor_psnr);
    let (tlo, thi) = psnr_range(test_psnr);
    let (lo, hi) = (alo.max(tlo), ahi.min(thi));
    if hi <= lo {
        return Err(Error::invalid(format!(
            "PSNR ranges do not overlap: anchor [{alo}, {ahi}], test [{tlo}, {thi}]"
        )));
    }
    let mean_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(mean_diff) - 1.0) * 100.0)
}

pub fn bd_rate(anchor: &RDCurve, test: &RDCurve) -> Result<f64> {
    let rates = |c: &RDCurve| c.bitrates_kbps().iter().map(|&b| b as f64).collect::<Vec<_>>();
    bd_rate_points(&rates(anchor), anchor.psnr_db(), &rates(test), test.psnr_db())
}
