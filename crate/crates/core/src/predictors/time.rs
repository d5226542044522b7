use serde::{Deserialize, Serialize};

use super::gbdt::{self, Ensemble, GbdtParams, RegressionTree};
use crate::domain::Preset;
use crate::error::{Error, Result};
use crate::features::{SegmentFeatures, NUM_FEATURES};

/// Smallest time a regressor may report.
pub const MIN_PREDICTED_TIME_S: f64 = 1e-6;

/// One measured transcode of a segment at (preset, bitrate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub features: SegmentFeatures,
    pub preset: Preset,
    pub target_bitrate_kbps: u32,
    pub transcode_time_s: f64,
}

impl TimeRow {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.target_bitrate_kbps == 0 {
            return Err(Error::invalid("target bitrate must be positive"));
        }
        if !(self.transcode_time_s > 0.0 && self.transcode_time_s.is_finite()) {
            return Err(Error::invalid(format!(
                "transcode time must be positive, got {}",
                self.transcode_time_s
            )));
        }
        Ok(())
    }
}

/// Per-preset transcoding-time regressor. The input vector is the selected
/// feature columns followed by the target bitrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeModel {
    pub preset: Preset,
    pub feature_indices: Vec<usize>,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

pub(crate) fn design_row(features: &SegmentFeatures, indices: &[usize], bitrate_kbps: u32) -> Vec<f64> {
    let mut x = features.select(indices);
    x.push(bitrate_kbps as f64);
    x
}

fn check_indices(indices: &[usize]) -> Result<()> {
    if let Some(&i) = indices.iter().find(|&&i| i >= NUM_FEATURES) {
        return Err(Error::invalid(format!("feature index {i} out of range")));
    }
    Ok(())
}

/// Trains and also returns the per-round training RMSE.
pub fn train_time_regressor_traced(
    rows: &[TimeRow],
    feature_indices: &[usize],
    params: &GbdtParams,
) -> Result<(TimeModel, Vec<f64>)> {
    let first = rows.first().ok_or_else(|| Error::invalid("no training rows"))?;
    if rows.iter().any(|r| r.preset != first.preset) {
        return Err(Error::invalid("time regressor rows mix presets"));
    }
    check_indices(feature_indices)?;
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| design_row(&r.features, feature_indices, r.target_bitrate_kbps))
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.transcode_time_s).collect();
    let fit = gbdt::fit(&x, &y, params)?;
    let Ensemble {
        base_prediction,
        learning_rate,
        trees,
    } = fit.ensemble;
    Ok((
        TimeModel {
            preset: first.preset,
            feature_indices: feature_indices.to_vec(),
            base_prediction,
            learning_rate,
            trees,
        },
        fit.train_rmse,
    ))
}

pub fn train_time_regressor(rows: &[TimeRow], feature_indices: &[usize], params: &GbdtParams) -> Result<TimeModel> {
    train_time_regressor_traced(rows, feature_indices, params).map(|(m, _)| m)
}

impl TimeModel {
    /// Unclamped ensemble output.
    pub fn raw_prediction(&self, features: &SegmentFeatures, bitrate_kbps: u32) -> f64 {
        let x = design_row(features, &self.feature_indices, bitrate_kbps);
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(&x)).sum();
        self.base_prediction + self.learning_rate * sum
    }
}

/// Predicted transcode time in seconds, floored at [`MIN_PREDICTED_TIME_S`].
pub fn predict_time(model: &TimeModel, features: &SegmentFeatures, bitrate_kbps: u32) -> Result<f64> {
    if bitrate_kbps == 0 {
        return Err(Error::invalid("bitrate must be positive"));
    }
    let raw = model.raw_prediction(features, bitrate_kbps);
    Ok(if raw.is_nan() { MIN_PREDICTED_TIME_S } else { raw.max(MIN_PREDICTED_TIME_S) })
}
