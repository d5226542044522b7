use serde::{Deserialize, Serialize};

use crate::domain::{Budgets, Preset};
use crate::error::{Error, Result};
use crate::solver::{PlanningInstance, Solution, SolveStatus};

/// Assigns the single point (preset, bitrate) to every segment.
///
/// With budgets the status is `Feasible` or `Infeasible`; the choice and
/// totals are kept either way so an over-budget baseline can still be
/// summarised.
pub fn baseline_plan(
    instance: &PlanningInstance,
    preset: Preset,
    per_segment_bitrate_kbps: u32,
    budgets: Option<&Budgets>,
) -> Result<Solution> {
    let grid = instance
        .grid
        .as_ref()
        .ok_or_else(|| Error::invalid("baseline needs an instance built on an operating grid"))?;
    let j = grid
        .index_of(preset, per_segment_bitrate_kbps)
        .ok_or_else(|| Error::invalid(format!("{preset}@{per_segment_bitrate_kbps} kbps is not in the grid")))?;
    let mut sol = Solution::from_choice(instance, vec![j; instance.num_segments()], SolveStatus::Feasible, 0)?;
    if let Some(b) = budgets {
        if !sol.within(b) {
            sol.status = SolveStatus::Infeasible;
        }
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub segment_id: String,
    pub point: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bitrate_kbps: Option<u32>,
    pub predicted_psnr_db: f64,
    pub rate_kbps: f64,
    pub predicted_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub segments: Vec<PlanEntry>,
    pub total_psnr_db: f64,
    pub total_rate_kbps: f64,
    pub total_time_s: f64,
    pub status: SolveStatus,
}

/// Per-segment breakdown of `solution`, with its stored totals re-derived
/// from the instance and checked to within 1e-9.
pub fn summarize_plan(solution: &Solution, instance: &PlanningInstance) -> Result<PlanSummary> {
    if solution.choice.is_empty() {
        return Err(Error::invalid("solution has no assignment to summarise"));
    }
    let (u, r, t) = instance.totals(&solution.choice)?;
    for (name, stored, fresh) in [
        ("utility", solution.total_utility, u),
        ("rate", solution.total_rate, r),
        ("time", solution.total_time, t),
    ] {
        if !((stored - fresh).abs() <= 1e-9 * (1.0 + fresh.abs())) {
            return Err(Error::Inconsistent(format!("stored total {name} {stored} != recomputed {fresh}")));
        }
    }
    let segments = solution
        .choice
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let point = instance.grid.as_ref().and_then(|g| g.point(j));
            PlanEntry {
                segment_id: instance.segment_ids[i].clone(),
                point: j,
                preset: point.map(|p| p.preset),
                bitrate_kbps: point.map(|p| p.bitrate_kbps),
                predicted_psnr_db: instance.utility(i, j),
                rate_kbps: instance.rate(i, j),
                predicted_time_s: instance.time(i, j),
            }
        })
        .collect();
    Ok(PlanSummary {
        segments,
        total_psnr_db: u,
        total_rate_kbps: r,
        total_time_s: t,
        status: solution.status,
    })
}
