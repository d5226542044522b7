use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::baseline_plan;
use super::bdrate::bd_rate_points;
use crate::domain::{Budgets, OperatingGrid, Preset};
use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::pipeline::ModelSet;
use crate::solver::{build_instance, solve_bb, PlanningInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Rate,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub runs: usize,
    pub seed: u64,
    pub segments_per_run: usize,
    /// Preset of the fixed baseline, run at R_th / L kbps per segment.
    pub baseline_preset: Preset,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            runs: 877,
            seed: 0,
            segments_per_run: 6,
            baseline_preset: Preset::Veryfast,
        }
    }
}

/// One budget setting, aggregated over all runs. Means cover feasible runs
/// only and are `None` when there were none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate_threshold_kbps: f64,
    pub time_threshold_s: f64,
    pub planner_feasible: u64,
    pub planner_infeasible: u64,
    pub planner_mean_total_psnr_db: Option<f64>,
    pub planner_mean_total_rate_kbps: Option<f64>,
    pub planner_mean_total_time_s: Option<f64>,
    /// Per-segment bitrate of the baseline, `None` when R_th / L is not a grid bitrate.
    pub baseline_bitrate_kbps: Option<u32>,
    pub baseline_feasible: u64,
    pub baseline_infeasible: u64,
    pub baseline_mean_total_psnr_db: Option<f64>,
    pub baseline_mean_total_rate_kbps: Option<f64>,
    /// Runs where both were feasible and the planner scored strictly higher.
    pub strict_improvements: u64,
    /// Runs where the baseline was feasible and beat the planner. Always 0 for an exact solver.
    pub dominance_violations: u64,
    /// Chosen presets over feasible planner runs; sums to L x planner_feasible.
    pub preset_histogram: BTreeMap<Preset, u64>,
    /// Mean speed rank (0 = fastest) of chosen presets.
    pub mean_speed_rank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub runs: usize,
    pub seed: u64,
    pub segments_per_run: usize,
    pub baseline_preset: Preset,
    pub rows: Vec<SweepRow>,
}

/// Distinct corpus indices for run `run`, independent of the budget so every
/// row of a sweep sees the same samples.
pub fn sample_segments(corpus_len: usize, per_run: usize, seed: u64, run: u64) -> Result<Vec<usize>> {
    if per_run == 0 || per_run > corpus_len {
        return Err(Error::invalid(format!("cannot draw {per_run} segments from a corpus of {corpus_len}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    Ok(rand::seq::index::sample(&mut rng, corpus_len, per_run).into_vec())
}

fn mean(sum: f64, n: u64) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Runs the planner and the fixed baseline over seeded samples of
/// `full` (an instance spanning the corpus) for each budget pair.
pub fn sweep_instance(
    full: &PlanningInstance,
    axis: SweepAxis,
    budgets: &[Budgets],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if opts.runs == 0 {
        return Err(Error::invalid("a sweep needs at least one run"));
    }
    let grid = full
        .grid
        .as_ref()
        .ok_or_else(|| Error::invalid("sweeps need an instance built on an operating grid"))?;
    let samples: Vec<PlanningInstance> = (0..opts.runs as u64)
        .map(|run| full.subset(&sample_segments(full.num_segments(), opts.segments_per_run, opts.seed, run)?))
        .collect::<Result<_>>()?;
    let l = opts.segments_per_run as f64;
    let mut rows = Vec::with_capacity(budgets.len());
    for b in budgets {
        let per_seg = b.rate_threshold_kbps / l;
        let baseline_bitrate = (per_seg.fract() == 0.0 && per_seg <= u32::MAX as f64)
            .then_some(per_seg as u32)
            .filter(|&r| grid.index_of(opts.baseline_preset, r).is_some());
        let mut row = SweepRow {
            rate_threshold_kbps: b.rate_threshold_kbps,
            time_threshold_s: b.time_threshold_s,
            planner_feasible: 0,
            planner_infeasible: 0,
            planner_mean_total_psnr_db: None,
            planner_mean_total_rate_kbps: None,
            planner_mean_total_time_s: None,
            baseline_bitrate_kbps: baseline_bitrate,
            baseline_feasible: 0,
            baseline_infeasible: 0,
            baseline_mean_total_psnr_db: None,
            baseline_mean_total_rate_kbps: None,
            strict_improvements: 0,
            dominance_violations: 0,
            preset_histogram: grid.presets().iter().map(|&p| (p, 0)).collect(),
            mean_speed_rank: None,
        };
        let (mut pu, mut pr, mut pt, mut bu, mut br, mut rank) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for inst in &samples {
            let plan = solve_bb(inst, b);
            if plan.is_feasible() {
                row.planner_feasible += 1;
                pu += plan.total_utility;
                pr += plan.total_rate;
                pt += plan.total_time;
                for &j in &plan.choice {
                    let preset = grid.point(j).expect("choice in grid").preset;
                    *row.preset_histogram.entry(preset).or_insert(0) += 1;
                    rank += f64::from(preset.speed_rank());
                }
            } else {
                row.planner_infeasible += 1;
            }
            if let Some(rate) = baseline_bitrate {
                let base = baseline_plan(inst, opts.baseline_preset, rate, Some(b))?;
                if base.is_feasible() {
                    row.baseline_feasible += 1;
                    bu += base.total_utility;
                    br += base.total_rate;
                    if !plan.is_feasible() || plan.total_utility < base.total_utility {
                        row.dominance_violations += 1;
                    } else if plan.total_utility > base.total_utility {
                        row.strict_improvements += 1;
                    }
                } else {
                    row.baseline_infeasible += 1;
                }
            }
        }
        row.planner_mean_total_psnr_db = mean(pu, row.planner_feasible);
        row.planner_mean_total_rate_kbps = mean(pr, row.planner_feasible);
        row.planner_mean_total_time_s = mean(pt, row.planner_feasible);
        row.baseline_mean_total_psnr_db = mean(bu, row.baseline_feasible);
        row.baseline_mean_total_rate_kbps = mean(br, row.baseline_feasible);
        row.mean_speed_rank = mean(rank, row.planner_feasible * opts.segments_per_run as u64);
        rows.push(row);
    }
    Ok(SweepReport {
        axis,
        runs: opts.runs,
        seed: opts.seed,
        segments_per_run: opts.segments_per_run,
        baseline_preset: opts.baseline_preset,
        rows,
    })
}

/// Planner vs. baseline across R_th values at a fixed T_th.
pub fn sweep_rate_budget(
    corpus: &[SegmentFeatures],
    grid: &OperatingGrid,
    models: &ModelSet,
    rate_budgets: &[f64],
    time_budget: f64,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let full = build_instance(corpus, grid, models)?;
    let budgets = rate_budgets
        .iter()
        .map(|&r| Budgets::new(r, time_budget))
        .collect::<Result<Vec<_>>>()?;
    sweep_instance(&full, SweepAxis::Rate, &budgets, opts)
}

/// Planner preset distribution and feasibility across T_th values at a fixed R_th.
pub fn sweep_time_budget(
    corpus: &[SegmentFeatures],
    grid: &OperatingGrid,
    models: &ModelSet,
    time_budgets: &[f64],
    rate_budget: f64,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let full = build_instance(corpus, grid, models)?;
    let budgets = time_budgets
        .iter()
        .map(|&t| Budgets::new(rate_budget, t))
        .collect::<Result<Vec<_>>>()?;
    sweep_instance(&full, SweepAxis::Time, &budgets, opts)
}

impl SweepReport {
    /// BD-rate of the planner against the baseline, using each row's mean
    /// total rate and mean total PSNR as one R-D sample. Rows where either
    /// side has no feasible run are skipped.
    pub fn bd_rate_vs_baseline(&self) -> Result<f64> {
        let (mut ar, mut ap, mut tr, mut tp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for row in &self.rows {
            if let (Some(bp), Some(brt), Some(pp), Some(prt)) = (
                row.baseline_mean_total_psnr_db,
                row.baseline_mean_total_rate_kbps,
                row.planner_mean_total_psnr_db,
                row.planner_mean_total_rate_kbps,
            ) {
                ar.push(brt);
                ap.push(bp);
                tr.push(prt);
                tp.push(pp);
            }
        }
        bd_rate_points(&ar, &ap, &tr, &tp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One CSV line per budget; empty cells stand for "no feasible run".
    pub fn to_csv(&self) -> Result<String> {
        let presets: Vec<Preset> = self
            .rows
            .first()
            .map(|r| r.preset_histogram.keys().copied().collect())
            .unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "rate_threshold_kbps",
            "time_threshold_s",
            "planner_feasible",
            "planner_infeasible",
            "planner_mean_total_psnr_db",
            "planner_mean_total_rate_kbps",
            "planner_mean_total_time_s",
            "baseline_bitrate_kbps",
            "baseline_feasible",
            "baseline_infeasible",
            "baseline_mean_total_psnr_db",
            "baseline_mean_total_rate_kbps",
            "strict_improvements",
            "dominance_violations",
            "mean_speed_rank",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(presets.iter().map(|p| format!("count_{p}")));
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.rate_threshold_kbps.to_string(),
                r.time_threshold_s.to_string(),
                r.planner_feasible.to_string(),
                r.planner_infeasible.to_string(),
                opt(r.planner_mean_total_psnr_db),
                opt(r.planner_mean_total_rate_kbps),
                opt(r.planner_mean_total_time_s),
                r.baseline_bitrate_kbps.map(|b| b.to_string()).unwrap_or_default(),
                r.baseline_feasible.to_string(),
                r.baseline_infeasible.to_string(),
                opt(r.baseline_mean_total_psnr_db),
                opt(r.baseline_mean_total_rate_kbps),
                r.strict_improvements.to_string(),
                r.dominance_violations.to_string(),
                opt(r.mean_speed_rank),
            ];
            rec.extend(presets.iter().map(|p| r.preset_histogram.get(p).copied().unwrap_or(0).to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(format!("CSV buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }
}
