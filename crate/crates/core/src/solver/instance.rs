use serde::{Deserialize, Serialize};

use crate::domain::{Budgets, OperatingGrid};
use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::pipeline::ModelSet;
use crate::predictors::{classify_rd, predict_time};
use crate::rdmodel::eval_curve;

/// L segments x M operating points of predicted PSNR, rate and time, stored
/// row-major (segment-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub segment_ids: Vec<String>,
    /// Present when the columns correspond to a real (preset, bitrate) grid.
    pub grid: Option<OperatingGrid>,
    num_segments: usize,
    num_points: usize,
    utility: Vec<f64>,
    rate: Vec<f64>,
    time: Vec<f64>,
}

impl PlanningInstance {
    /// Builds an instance from per-segment rows. Rates and times must be
    /// positive and finite, utilities finite.
    pub fn from_matrices(utility: Vec<Vec<f64>>, rate: Vec<Vec<f64>>, time: Vec<Vec<f64>>) -> Result<Self> {
        let l = utility.len();
        if l == 0 || rate.len() != l || time.len() != l {
            return Err(Error::invalid("instance matrices need the same, non-zero number of rows"));
        }
        let m = utility[0].len();
        if m == 0 {
            return Err(Error::invalid("instance needs at least one operating point"));
        }
        for rows in [&utility, &rate, &time] {
            if rows.iter().any(|r| r.len() != m) {
                return Err(Error::invalid("instance matrices must all be L x M"));
            }
        }
        let utility: Vec<f64> = utility.into_iter().flatten().collect();
        let rate: Vec<f64> = rate.into_iter().flatten().collect();
        let time: Vec<f64> = time.into_iter().flatten().collect();
        if utility.iter().any(|u| !u.is_finite()) {
            return Err(Error::invalid("utilities must be finite"));
        }
        if rate.iter().chain(&time).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("rates and times must be positive and finite"));
        }
        Ok(PlanningInstance {
            segment_ids: (0..l).map(|i| format!("seg{i}")).collect(),
            grid: None,
            num_segments: l,
            num_points: m,
            utility,
            rate,
            time,
        })
    }

    pub fn with_grid(mut self, grid: OperatingGrid) -> Result<Self> {
        if grid.len() != self.num_points {
            return Err(Error::invalid("grid size does not match the instance width"));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn with_segment_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.num_segments {
            return Err(Error::invalid("one segment id per row is required"));
        }
        self.segment_ids = ids;
        Ok(self)
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn utility(&self, i: usize, j: usize) -> f64 {
        self.utility[i * self.num_points + j]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rate[i * self.num_points + j]
    }

    pub fn time(&self, i: usize, j: usize) -> f64 {
        self.time[i * self.num_points + j]
    }

    pub fn utility_row(&self, i: usize) -> &[f64] {
        &self.utility[i * self.num_points..(i + 1) * self.num_points]
    }

    pub fn rate_row(&self, i: usize) -> &[f64] {
        &self.rate[i * self.num_points..(i + 1) * self.num_points]
    }

    pub fn time_row(&self, i: usize) -> &[f64] {
        &self.time[i * self.num_points..(i + 1) * self.num_points]
    }

    /// The instance restricted to `segments`, in the given order.
    pub fn subset(&self, segments: &[usize]) -> Result<Self> {
        if segments.is_empty() || segments.iter().any(|&s| s >= self.num_segments) {
            return Err(Error::invalid("segment subset out of range"));
        }
        let pick = |v: &[f64]| -> Vec<f64> {
            segments
                .iter()
                .flat_map(|&s| v[s * self.num_points..(s + 1) * self.num_points].iter().copied())
                .collect()
        };
        Ok(PlanningInstance {
            segment_ids: segments.iter().map(|&s| self.segment_ids[s].clone()).collect(),
            grid: self.grid.clone(),
            num_segments: segments.len(),
            num_points: self.num_points,
            utility: pick(&self.utility),
            rate: pick(&self.rate),
            time: pick(&self.time),
        })
    }

    /// Sums of utility, rate and time over `choice`, accumulated in segment
    /// order. Every solver reports totals computed this way.
    pub fn totals(&self, choice: &[usize]) -> Result<(f64, f64, f64)> {
        if choice.len() != self.num_segments {
            return Err(Error::invalid("choice must pick one point per segment"));
        }
        let (mut u, mut r, mut t) = (0.0, 0.0, 0.0);
        for (i, &j) in choice.iter().enumerate() {
            if j >= self.num_points {
                return Err(Error::invalid(format!("operating point {j} out of range for segment {i}")));
            }
            u += self.utility(i, j);
            r += self.rate(i, j);
            t += self.time(i, j);
        }
        Ok((u, r, t))
    }

    /// Smallest achievable total rate and total time, each minimised on its own.
    pub fn min_totals(&self) -> (f64, f64) {
        let mut r = 0.0;
        let mut t = 0.0;
        for i in 0..self.num_segments {
            r += self.rate_row(i).iter().copied().fold(f64::INFINITY, f64::min);
            t += self.time_row(i).iter().copied().fold(f64::INFINITY, f64::min);
        }
        (r, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    /// Proven best feasible assignment.
    Optimal,
    /// Satisfies the budgets, optimality not claimed (baselines, heuristics).
    Feasible,
    Infeasible,
}

/// Why no assignment fits: the smallest total rate and time reachable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityDiagnostics {
    pub min_total_rate_kbps: f64,
    pub min_total_time_s: f64,
}

/// One operating point per segment (`choice[i] = j` marks x_ij = 1).
/// Infeasible solutions carry an empty `choice` and zero totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub choice: Vec<usize>,
    pub total_utility: f64,
    pub total_rate: f64,
    pub total_time: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub diagnostics: Option<InfeasibilityDiagnostics>,
}

impl Solution {
    pub(crate) fn from_choice(
        instance: &PlanningInstance,
        choice: Vec<usize>,
        status: SolveStatus,
        nodes_explored: u64,
    ) -> Result<Self> {
        let (u, r, t) = instance.totals(&choice)?;
        Ok(Solution {
            choice,
            total_utility: u,
            total_rate: r,
            total_time: t,
            status,
            nodes_explored,
            diagnostics: None,
        })
    }

    pub(crate) fn infeasible(instance: &PlanningInstance, nodes_explored: u64) -> Self {
        let (min_total_rate_kbps, min_total_time_s) = instance.min_totals();
        Solution {
            choice: Vec::new(),
            total_utility: 0.0,
            total_rate: 0.0,
            total_time: 0.0,
            status: SolveStatus::Infeasible,
            nodes_explored,
            diagnostics: Some(InfeasibilityDiagnostics {
                min_total_rate_kbps,
                min_total_time_s,
            }),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    /// Inclusive budget check on the stored totals.
    pub fn within(&self, budgets: &Budgets) -> bool {
        self.total_rate <= budgets.rate_threshold_kbps && self.total_time <= budgets.time_threshold_s
    }
}

/// Fills the L x M matrices for `segments` from trained models:
/// time from the preset's regressor, utility from the fitted centroid of the
/// class the preset's classifier assigns, rate from the grid bitrate.
pub fn build_instance(segments: &[SegmentFeatures], grid: &OperatingGrid, models: &ModelSet) -> Result<PlanningInstance> {
    if segments.is_empty() {
        return Err(Error::invalid("no segments to plan"));
    }
    for &preset in grid.presets() {
        models.time_model(preset)?;
        models.cluster_model(preset)?;
        models.rd_classifier(preset)?;
    }
    let (mut utility, mut rate, mut time) = (Vec::new(), Vec::new(), Vec::new());
    for seg in segments {
        seg.validate()?;
        // One classification per preset, reused across that preset's bitrates.
        let mut curves = Vec::with_capacity(grid.presets().len());
        for &preset in grid.presets() {
            let cluster = models.cluster_model(preset)?;
            let class = classify_rd(models.rd_classifier(preset)?, seg);
            let curve = cluster.fitted.get(class).ok_or_else(|| {
                Error::Inconsistent(format!("classifier for {preset} returned class {class} outside k = {}", cluster.k))
            })?;
            curves.push((preset, *curve));
        }
        let (mut u_row, mut r_row, mut t_row) = (Vec::new(), Vec::new(), Vec::new());
        for p in grid.points() {
            let (_, curve) = curves.iter().find(|(q, _)| *q == p.preset).expect("preset in grid");
            u_row.push(eval_curve(curve, p.bitrate_kbps as f64)?);
            r_row.push(p.bitrate_kbps as f64);
            t_row.push(predict_time(models.time_model(p.preset)?, seg, p.bitrate_kbps)?);
        }
        utility.push(u_row);
        rate.push(r_row);
        time.push(t_row);
    }
    PlanningInstance::from_matrices(utility, rate, time)?
        .with_grid(grid.clone())?
        .with_segment_ids(segments.iter().map(|s| s.segment_id.clone()).collect())
}
