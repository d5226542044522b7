//! Supervised predictors: per-preset transcoding-time regressors, per-preset
//! R-D class classifiers, cross-validation and feature elimination.

pub mod cv;
pub mod gbdt;
pub mod metrics;
pub mod svm;
pub mod time;

pub use cv::{kfold_cv, kfold_indices, rfecv, select_time_features, CvScores, RfecvReport};
pub use gbdt::GbdtParams;
pub use metrics::{regression_metrics, RegressionMetrics};
pub use svm::{classify_rd, train_rd_classifier, RDClassModel, RDRow, SvmParams};
pub use time::{predict_time, train_time_regressor, train_time_regressor_traced, TimeModel, TimeRow};
