//! Fixed-preset baselines, plan summaries, BD-rate and budget sweeps.

mod baseline;
mod bdrate;
mod sweep;

pub use baseline::{baseline_plan, summarize_plan, PlanEntry, PlanSummary};
pub use bdrate::{bd_rate, bd_rate_points};
pub use sweep::{
    sample_segments, sweep_instance, sweep_rate_budget, sweep_time_budget, SweepAxis, SweepOptions, SweepReport, SweepRow,
};
