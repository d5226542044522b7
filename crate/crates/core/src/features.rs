//! Per-segment bitstream features and the masks selecting which of them feed
//! the transcoding-time regressors and the R-D classifiers.
//!
//! Every feature is read from the headers/metadata of the ingest stream, so
//! producing one costs no decoding. The column order of [`FEATURE_NAMES`] is
//! the canonical order used by tables and model input vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 25;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "pict_type_B",
    "pict_type_P",
    "i_mb",
    "p_mb",
    "b_mb",
    "s_mb",
    "mb_16x16",
    "mb_16x8",
    "mb_8x16",
    "mb_8x8",
    "mb_4x4",
    "sar",
    "skip_ratio_b",
    "skip_ratio_p",
    "avg_qp_y_p",
    "avg_qp_y_b",
    "avg_qp_y_i",
    "mv_count",
    "mv_mean",
    "color_range",
    "color_space",
    "color_primaries",
    "color_transfer",
    "width",
    "height",
];

/// Index of a feature by column name.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// Integer codes for the categorical colour fields.
///
/// | field            | 0           | 1         | 2         | 3        |
/// |------------------|-------------|-----------|-----------|----------|
/// | color_range      | unknown     | tv        | pc        |          |
/// | color_space      | unknown     | bt709     | bt470bg   | bt2020nc |
/// | color_primaries  | unknown     | bt709     | bt470bg   | bt2020   |
/// | color_transfer   | unknown     | bt709     | smpte170m | smpte2084|
pub mod color_codes {
    pub const UNKNOWN: u8 = 0;
    pub const RANGE_TV: u8 = 1;
    pub const RANGE_PC: u8 = 2;
    pub const BT709: u8 = 1;
    pub const BT470BG: u8 = 2;
    pub const BT2020: u8 = 3;
    pub const TRANSFER_SMPTE170M: u8 = 2;
    pub const TRANSFER_SMPTE2084: u8 = 3;
}

fn default_duration() -> f64 {
    2.0
}

/// Feature vector of one segment.
///
/// `s_mb` is carried verbatim from the producer; its semantics are whatever
/// the feature extractor reports as S macroblocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub segment_id: String,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub pict_type_b: f64,
    pub pict_type_p: f64,
    pub i_mb: f64,
    pub p_mb: f64,
    pub b_mb: f64,
    pub s_mb: f64,
    pub mb_16x16: f64,
    pub mb_16x8: f64,
    pub mb_8x16: f64,
    pub mb_8x8: f64,
    pub mb_4x4: f64,
    pub sar: f64,
    pub skip_ratio_b: f64,
    pub skip_ratio_p: f64,
    pub avg_qp_y_p: f64,
    pub avg_qp_y_b: f64,
    pub avg_qp_y_i: f64,
    pub mv_count: f64,
    pub mv_mean: f64,
    pub color_range: u8,
    pub color_space: u8,
    pub color_primaries: u8,
    pub color_transfer: u8,
    pub width: u32,
    pub height: u32,
}

impl SegmentFeatures {
    /// Numeric view in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; NUM_FEATURES] {
        [
            self.pict_type_b,
            self.pict_type_p,
            self.i_mb,
            self.p_mb,
            self.b_mb,
            self.s_mb,
            self.mb_16x16,
            self.mb_16x8,
            self.mb_8x16,
            self.mb_8x8,
            self.mb_4x4,
            self.sar,
            self.skip_ratio_b,
            self.skip_ratio_p,
            self.avg_qp_y_p,
            self.avg_qp_y_b,
            self.avg_qp_y_i,
            self.mv_count,
            self.mv_mean,
            self.color_range as f64,
            self.color_space as f64,
            self.color_primaries as f64,
            self.color_transfer as f64,
            self.width as f64,
            self.height as f64,
        ]
    }

    /// Inverse of [`values`](Self::values). Validates the result.
    pub fn from_values(segment_id: impl Into<String>, duration_s: f64, v: &[f64; NUM_FEATURES]) -> Result<Self> {
        fn code(name: &str, x: f64) -> Result<u8> {
            if x.fract() != 0.0 || !(0.0..=255.0).contains(&x) {
                return Err(Error::invalid(format!("{name} must be an integer code in 0..=255, got {x}")));
            }
            Ok(x as u8)
        }
        fn pixels(name: &str, x: f64) -> Result<u32> {
            if x.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&x) {
                return Err(Error::invalid(format!("{name} must be a positive integer, got {x}")));
            }
            Ok(x as u32)
        }
        let f = SegmentFeatures {
            segment_id: segment_id.into(),
            duration_s,
            pict_type_b: v[0],
            pict_type_p: v[1],
            i_mb: v[2],
            p_mb: v[3],
            b_mb: v[4],
            s_mb: v[5],
            mb_16x16: v[6],
            mb_16x8: v[7],
            mb_8x16: v[8],
            mb_8x8: v[9],
            mb_4x4: v[10],
            sar: v[11],
            skip_ratio_b: v[12],
            skip_ratio_p: v[13],
            avg_qp_y_p: v[14],
            avg_qp_y_b: v[15],
            avg_qp_y_i: v[16],
            mv_count: v[17],
            mv_mean: v[18],
            color_range: code("color_range", v[19])?,
            color_space: code("color_space", v[20])?,
            color_primaries: code("color_primaries", v[21])?,
            color_transfer: code("color_transfer", v[22])?,
            width: pixels("width", v[23])?,
            height: pixels("height", v[24])?,
        };
        f.validate()?;
        Ok(f)
    }

    /// Checks counts are non-negative, ratios lie in [0, 1], and sizes and
    /// duration are positive. Returns the first offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(format!("duration_s must be positive, got {}", self.duration_s)));
        }
        let v = self.values();
        for (i, (&name, &x)) in FEATURE_NAMES.iter().zip(v.iter()).enumerate() {
            if !x.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
            let ok = match i {
                12 | 13 => (0.0..=1.0).contains(&x),
                23 | 24 => x > 0.0,
                _ => x >= 0.0,
            };
            if !ok {
                return Err(Error::invalid(format!("{name} out of range: {x}")));
            }
        }
        Ok(())
    }

    /// Gathers the values at `indices`.
    pub fn select(&self, indices: &[usize]) -> Vec<f64> {
        let v = self.values();
        indices.iter().map(|&i| v[i]).collect()
    }
}

/// Which features feed which predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub use_for_time: [bool; NUM_FEATURES],
    pub use_for_rd: [bool; NUM_FEATURES],
}

impl Default for FeatureMask {
    fn default() -> Self {
        const T: bool = true;
        const F: bool = false;
        FeatureMask {
            //             B  P  I  P  B  S 16 168 816 8  4 sar skB skP qpP qpB qpI mv mvM cr cs cp ct  w  h
            use_for_time: [T, T, T, T, T, T, T, T, T, T, T, T, F, F, F, F, F, T, T, T, T, T, T, T, T],
            use_for_rd: [T, T, T, T, T, F, F, F, F, F, F, F, T, T, T, T, T, F, T, F, F, F, F, F, F],
        }
    }
}

impl FeatureMask {
    pub fn time_indices(&self) -> Vec<usize> {
        (0..NUM_FEATURES).filter(|&i| self.use_for_time[i]).collect()
    }

    pub fn rd_indices(&self) -> Vec<usize> {
        (0..NUM_FEATURES).filter(|&i| self.use_for_rd[i]).collect()
    }
}
