//! Rate-distortion knowledge base: per-preset k-means over sampled R-D curves,
//! logarithmic fits of the centroids, and centroid lookup.

mod curve;
mod kmeans;

pub use curve::{eval_curve, fit_centroid, fit_log_curve, LogCurve, RDCurve};
pub use kmeans::{assign_cluster, kmeans_cluster, ClusterFit, ClusterModel, KMeansParams};
