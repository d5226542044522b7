//! Per-preset training of the three model families, and the container that
//! carries them to the planner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Preset;
use crate::error::{Error, Result};
use crate::features::{FeatureMask, SegmentFeatures};
use crate::predictors::{train_rd_classifier, train_time_regressor, GbdtParams, RDClassModel, RDRow, SvmParams, TimeModel, TimeRow};
use crate::rdmodel::{kmeans_cluster, ClusterFit, ClusterModel, KMeansParams, RDCurve};

/// One segment's measured R-D curve under one preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDRecord {
    pub features: SegmentFeatures,
    pub preset: Preset,
    pub curve: RDCurve,
}

/// Trained models keyed by preset. Any subset may be present; lookups for a
/// missing preset fail with [`Error::MissingModel`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub time_models: BTreeMap<Preset, TimeModel>,
    pub cluster_models: BTreeMap<Preset, ClusterModel>,
    pub rd_classifiers: BTreeMap<Preset, RDClassModel>,
}

impl ModelSet {
    pub fn is_empty(&self) -> bool {
        self.time_models.is_empty() && self.cluster_models.is_empty() && self.rd_classifiers.is_empty()
    }

    pub fn time_model(&self, preset: Preset) -> Result<&TimeModel> {
        self.time_models.get(&preset).ok_or(Error::MissingModel { kind: "time", preset })
    }

    pub fn cluster_model(&self, preset: Preset) -> Result<&ClusterModel> {
        self.cluster_models.get(&preset).ok_or(Error::MissingModel { kind: "cluster", preset })
    }

    pub fn rd_classifier(&self, preset: Preset) -> Result<&RDClassModel> {
        self.rd_classifiers.get(&preset).ok_or(Error::MissingModel { kind: "classifier", preset })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub gbdt: GbdtParams,
    pub svm: SvmParams,
    pub kmeans: KMeansParams,
    pub mask: FeatureMask,
    /// Per-preset time features overriding `mask`, e.g. from feature selection.
    #[serde(default)]
    pub time_features: BTreeMap<Preset, Vec<usize>>,
}

fn presets_of<'a>(it: impl Iterator<Item = &'a Preset>) -> Vec<Preset> {
    let mut v: Vec<Preset> = it.copied().collect();
    v.sort();
    v.dedup();
    v
}

/// K-means per preset over that preset's curves, in record order.
pub fn cluster_presets(records: &[RDRecord], params: &KMeansParams) -> Result<BTreeMap<Preset, ClusterFit>> {
    let mut out = BTreeMap::new();
    for preset in presets_of(records.iter().map(|r| &r.preset)) {
        let curves: Vec<RDCurve> = records.iter().filter(|r| r.preset == preset).map(|r| r.curve.clone()).collect();
        out.insert(preset, kmeans_cluster(preset, &curves, params)?);
    }
    Ok(out)
}

/// One classifier per clustered preset, trained on cluster assignments.
pub fn train_rd_classifiers(
    records: &[RDRecord],
    clusters: &BTreeMap<Preset, ClusterFit>,
    feature_indices: &[usize],
    params: &SvmParams,
) -> Result<BTreeMap<Preset, RDClassModel>> {
    let mut out = BTreeMap::new();
    for (&preset, fit) in clusters {
        let rows: Vec<RDRow> = records
            .iter()
            .filter(|r| r.preset == preset)
            .zip(&fit.assignments)
            .map(|(r, &label)| RDRow {
                features: r.features.clone(),
                preset,
                cluster_label: label,
            })
            .collect();
        if rows.len() != fit.assignments.len() {
            return Err(Error::Inconsistent(format!("{preset}: cluster assignments do not match the R-D records")));
        }
        out.insert(preset, train_rd_classifier(&rows, feature_indices, params)?);
    }
    Ok(out)
}

/// One time regressor per preset present in `rows`.
pub fn train_time_models(rows: &[TimeRow], params: &TrainingParams) -> Result<BTreeMap<Preset, TimeModel>> {
    let default_features = params.mask.time_indices();
    let mut out = BTreeMap::new();
    for preset in presets_of(rows.iter().map(|r| &r.preset)) {
        let subset: Vec<TimeRow> = rows.iter().filter(|r| r.preset == preset).cloned().collect();
        let features = params.time_features.get(&preset).unwrap_or(&default_features);
        out.insert(preset, train_time_regressor(&subset, features, &params.gbdt)?);
    }
    Ok(out)
}

/// Clusters, classifiers and time regressors for every preset in the data.
pub fn train_all(time_rows: &[TimeRow], rd_records: &[RDRecord], params: &TrainingParams) -> Result<ModelSet> {
    let clusters = cluster_presets(rd_records, &params.kmeans)?;
    let rd_classifiers = train_rd_classifiers(rd_records, &clusters, &params.mask.rd_indices(), &params.svm)?;
    Ok(ModelSet {
        time_models: train_time_models(time_rows, params)?,
        cluster_models: clusters.into_iter().map(|(p, f)| (p, f.model)).collect(),
        rd_classifiers,
    })
}
