//! Per-segment transcoding preset and bitrate selection.
//!
//! Predicts, for every segment of a live stream window, the transcoding time
//! and the rate-distortion behaviour of each (preset, bitrate) operating
//! point, then picks one point per segment to maximise total PSNR under
//! total-rate and total-time budgets.

pub mod cli;
pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod predictors;
pub mod rdmodel;
pub mod solver;
pub mod synth;

pub use domain::{build_operating_grid, derive_time_threshold, Budgets, OperatingGrid, OperatingPoint, Preset};
pub use error::{Error, Result};
pub use features::{FeatureMask, SegmentFeatures};
