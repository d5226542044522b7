//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 infeasible plan.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::domain::{Budgets, Preset};
use crate::error::{Error, Result};
use crate::eval::{bd_rate, sweep_rate_budget, sweep_time_budget, SweepReport};
use crate::features::FeatureMask;
use crate::io::{
    load_curve_table, load_features_table, load_models, load_rd_table, load_time_table, save_models,
    write_features_table, write_rd_table, write_time_table, Config,
};
use crate::pipeline::{cluster_presets, train_time_models, ModelSet, RDRecord};
use crate::predictors::{select_time_features, train_rd_classifier, RDRow, RfecvReport};
use crate::rdmodel::assign_cluster;
use crate::solver::{build_instance, solve_bb, InfeasibilityDiagnostics, SolveStatus};
use crate::synth::{gen_corpus, Archetype};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "presetplan", version, about = "Per-segment preset and bitrate planning under rate and time budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file (defaults to $PRESETPLAN_CONFIG, then built-in defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; see each subcommand for its meaning.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus (time.csv, rd.csv, features.csv) into the --out directory.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        segments: Option<usize>,
        /// Restrict to these archetypes (repeatable).
        #[arg(long)]
        archetype: Vec<Archetype>,
        /// Add curvature to the true R-D curves.
        #[arg(long)]
        hard: bool,
    },
    /// K-means the R-D curves of each preset and store the cluster models.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rd_table: Option<PathBuf>,
        /// Model file to update; --out defaults to it.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Train one transcoding-time regressor per preset.
    TrainTime {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        time_table: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Per-preset feature selection written by select-features.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Train one R-D class classifier per clustered preset.
    TrainRd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rd_table: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Cross-validated backward elimination of time-regressor features, per preset.
    SelectFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        time_table: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        /// Boosting rounds used while scoring candidate sets.
        #[arg(long)]
        rounds: Option<usize>,
        /// Limit to these presets (repeatable).
        #[arg(long)]
        preset: Vec<Preset>,
    },
    /// Choose one operating point per segment; writes the plan JSON.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// First segment of the window within the features table.
        #[arg(long, default_value_t = 0)]
        offset: usize,
        /// Window length (defaults to segments_per_plan).
        #[arg(long)]
        count: Option<usize>,
        /// Total rate budget in kbps.
        #[arg(long)]
        rate: Option<f64>,
        /// Total time budget in seconds.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Planner vs. fixed baseline across the configured R_th values; --out is the CSV path, JSON goes alongside.
    SweepRate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Fixed time budget in seconds.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Preset distribution and feasibility across the configured T_th values.
    SweepTime {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Fixed rate budget in kbps.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// BD-rate (percent) of --test against --anchor; both are bitrate_kbps,psnr_db CSVs.
    BdRate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        anchor: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Render a plan or sweep JSON file as a text table.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSegment {
    pub segment_id: String,
    pub preset: Preset,
    pub bitrate_kbps: u32,
    pub predicted_time_s: f64,
    pub predicted_psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTotals {
    pub psnr_db: f64,
    pub rate_kbps: f64,
    pub time_s: f64,
}

/// The document `plan` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOutput {
    pub status: SolveStatus,
    pub budgets: Budgets,
    pub segments: Vec<PlannedSegment>,
    pub totals: PlanTotals,
    pub nodes_explored: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<InfeasibilityDiagnostics>,
}

enum Failure {
    Usage(String),
    Data(Error),
    Infeasible,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
        Err(Failure::Infeasible) => EXIT_INFEASIBLE,
    }
}

fn config(common: &Common) -> CliResult<Config> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes to `out`, or stdout when no path was given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_or_empty(path: &Path) -> Result<ModelSet> {
    if path.exists() {
        load_models(path)
    } else {
        Ok(ModelSet::default())
    }
}

fn save_to(out: Option<&Path>, models_path: &Path, models: &ModelSet) -> Result<()> {
    let target = out.unwrap_or(models_path);
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_models(target, models)
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::GenData {
            common,
            segments,
            archetype,
            hard,
        } => {
            let mut cfg = config(&common)?;
            if let Some(n) = segments {
                cfg.synth.num_segments = n;
            }
            if !archetype.is_empty() {
                cfg.synth.archetypes = archetype;
            }
            cfg.synth.hard_mode |= hard;
            cfg.validate()?;
            let corpus = gen_corpus(&cfg.synth_params(), &cfg.grid()?)?;
            let dir = common.out.unwrap_or(cfg.paths.data_dir);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_time_table(dir.join("time.csv"), &corpus.time_rows)?;
            write_rd_table(dir.join("rd.csv"), &corpus.rd_records)?;
            write_features_table(dir.join("features.csv"), &corpus.features())?;
            eprintln!(
                "wrote {} segments ({} time rows, {} R-D rows) to {}",
                corpus.segments.len(),
                corpus.time_rows.len(),
                corpus.rd_records.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Cluster {
            common,
            rd_table,
            models,
        } => {
            let cfg = config(&common)?;
            let records = load_rd_table(rd_table.unwrap_or_else(|| cfg.paths.data_dir.join("rd.csv")))?;
            let models_path = models.unwrap_or(cfg.paths.models.clone());
            let mut set = load_or_empty(&models_path)?;
            let fits = cluster_presets(&records, &cfg.training_params().kmeans)?;
            for (preset, fit) in fits {
                eprintln!(
                    "{preset}: k={} inertia={:.4} after {} iterations",
                    fit.model.k, fit.model.inertia, fit.iterations
                );
                set.cluster_models.insert(preset, fit.model);
            }
            save_to(common.out.as_deref(), &models_path, &set)?;
            Ok(())
        }
        Command::TrainTime {
            common,
            time_table,
            models,
            selection,
        } => {
            let cfg = config(&common)?;
            let rows = load_time_table(time_table.unwrap_or_else(|| cfg.paths.data_dir.join("time.csv")))?;
            let models_path = models.unwrap_or(cfg.paths.models.clone());
            let mut set = load_or_empty(&models_path)?;
            let mut params = cfg.training_params();
            if let Some(sel) = selection {
                let text = std::fs::read_to_string(&sel).map_err(|e| Error::io(&sel, e))?;
                let reports: BTreeMap<Preset, RfecvReport> = serde_json::from_str(&text).map_err(Error::from)?;
                params.time_features = reports.into_iter().map(|(p, r)| (p, r.selected)).collect();
            }
            for (preset, model) in train_time_models(&rows, &params)? {
                eprintln!("{preset}: {} trees on {} features", model.trees.len(), model.feature_indices.len());
                set.time_models.insert(preset, model);
            }
            save_to(common.out.as_deref(), &models_path, &set)?;
            Ok(())
        }
        Command::TrainRd {
            common,
            rd_table,
            models,
        } => {
            let cfg = config(&common)?;
            let records = load_rd_table(rd_table.unwrap_or_else(|| cfg.paths.data_dir.join("rd.csv")))?;
            let models_path = models.unwrap_or(cfg.paths.models.clone());
            let mut set = load_or_empty(&models_path)?;
            let indices = FeatureMask::default().rd_indices();
            let mut presets: Vec<Preset> = records.iter().map(|r| r.preset).collect();
            presets.sort();
            presets.dedup();
            for preset in presets {
                let cluster = set.cluster_model(preset)?;
                let rows = records
                    .iter()
                    .filter(|r| r.preset == preset)
                    .map(|r: &RDRecord| {
                        Ok(RDRow {
                            features: r.features.clone(),
                            preset,
                            cluster_label: assign_cluster(&r.curve, cluster)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let model = train_rd_classifier(&rows, &indices, &cfg.svm)?;
                let correct = rows
                    .iter()
                    .filter(|r| crate::predictors::classify_rd(&model, &r.features) == r.cluster_label)
                    .count();
                eprintln!(
                    "{preset}: {} classes, training accuracy {:.3}",
                    model.classes.len(),
                    correct as f64 / rows.len() as f64
                );
                set.rd_classifiers.insert(preset, model);
            }
            save_to(common.out.as_deref(), &models_path, &set)?;
            Ok(())
        }
        Command::SelectFeatures {
            common,
            time_table,
            folds,
            rounds,
            preset,
        } => {
            let cfg = config(&common)?;
            let rows = load_time_table(time_table.unwrap_or_else(|| cfg.paths.data_dir.join("time.csv")))?;
            let mut gbdt = cfg.gbdt;
            if let Some(r) = rounds {
                gbdt.rounds = r;
            }
            let candidates = FeatureMask::default().time_indices();
            let mut presets: Vec<Preset> = rows.iter().map(|r| r.preset).filter(|p| preset.is_empty() || preset.contains(p)).collect();
            presets.sort();
            presets.dedup();
            let mut out = BTreeMap::new();
            for p in presets {
                let subset: Vec<_> = rows.iter().filter(|r| r.preset == p).cloned().collect();
                let report = select_time_features(&subset, &candidates, &gbdt, folds.unwrap_or(cfg.cv_folds), cfg.seed)?;
                eprintln!("{p}: kept {}/{} features", report.selected.len(), candidates.len());
                out.insert(p, report);
            }
            emit(common.out.as_deref(), &(serde_json::to_string_pretty(&out).map_err(Error::from)? + "\n"))?;
            Ok(())
        }
        Command::Plan {
            common,
            features,
            models,
            offset,
            count,
            rate,
            time,
        } => {
            let cfg = config(&common)?;
            let all = load_features_table(features.unwrap_or_else(|| cfg.paths.data_dir.join("features.csv")))?;
            let set = load_models(models.unwrap_or(cfg.paths.models.clone()))?;
            let count = count.unwrap_or(cfg.segments_per_plan);
            if count == 0 {
                return Err(Failure::Usage("--count must be positive".into()));
            }
            let window = all.get(offset..offset + count).ok_or_else(|| {
                Failure::Data(Error::invalid(format!(
                    "window {offset}..{} exceeds the {} segments in the features table",
                    offset + count,
                    all.len()
                )))
            })?;
            let budgets = Budgets::new(rate.unwrap_or(cfg.rate_threshold_kbps), time.unwrap_or(cfg.time_threshold_s))
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let grid = cfg.grid()?;
            let instance = build_instance(window, &grid, &set)?;
            let started = Instant::now();
            let solution = solve_bb(&instance, &budgets);
            let elapsed = started.elapsed();
            eprintln!(
                "solve: {:.3} ms, {} nodes",
                elapsed.as_secs_f64() * 1e3,
                solution.nodes_explored
            );
            let segments = solution
                .choice
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let p = grid.point(j).expect("solver picks grid points");
                    PlannedSegment {
                        segment_id: instance.segment_ids[i].clone(),
                        preset: p.preset,
                        bitrate_kbps: p.bitrate_kbps,
                        predicted_time_s: instance.time(i, j),
                        predicted_psnr_db: instance.utility(i, j),
                    }
                })
                .collect();
            let plan = PlanOutput {
                status: solution.status,
                budgets,
                segments,
                totals: PlanTotals {
                    psnr_db: solution.total_utility,
                    rate_kbps: solution.total_rate,
                    time_s: solution.total_time,
                },
                nodes_explored: solution.nodes_explored,
                diagnostics: solution.diagnostics,
            };
            emit(common.out.as_deref(), &(serde_json::to_string_pretty(&plan).map_err(Error::from)? + "\n"))?;
            if let Some(d) = solution.diagnostics {
                eprintln!(
                    "infeasible: minimum achievable total time {:.4} s (budget {} s), minimum total rate {} kbps (budget {} kbps)",
                    d.min_total_time_s, budgets.time_threshold_s, d.min_total_rate_kbps, budgets.rate_threshold_kbps
                );
                return Err(Failure::Infeasible);
            }
            Ok(())
        }
        Command::SweepRate {
            common,
            features,
            models,
            runs,
            time,
        } => {
            let cfg = config(&common)?;
            let corpus = load_features_table(features.unwrap_or_else(|| cfg.paths.data_dir.join("features.csv")))?;
            let set = load_models(models.unwrap_or(cfg.paths.models.clone()))?;
            let mut opts = cfg.sweep_options();
            if let Some(r) = runs {
                opts.runs = r;
            }
            let report = sweep_rate_budget(
                &corpus,
                &cfg.grid()?,
                &set,
                &cfg.sweep.rate_budgets_kbps,
                time.unwrap_or(cfg.time_threshold_s),
                &opts,
            )?;
            match report.bd_rate_vs_baseline() {
                Ok(bd) => eprintln!("BD-rate of planner vs {} baseline: {bd:.2}%", opts.baseline_preset),
                Err(e) => eprintln!("BD-rate unavailable: {e}"),
            }
            write_report(common.out.as_deref(), &report)?;
            Ok(())
        }
        Command::SweepTime {
            common,
            features,
            models,
            runs,
            rate,
        } => {
            let cfg = config(&common)?;
            let corpus = load_features_table(features.unwrap_or_else(|| cfg.paths.data_dir.join("features.csv")))?;
            let set = load_models(models.unwrap_or(cfg.paths.models.clone()))?;
            let mut opts = cfg.sweep_options();
            if let Some(r) = runs {
                opts.runs = r;
            }
            let report = sweep_time_budget(
                &corpus,
                &cfg.grid()?,
                &set,
                &cfg.sweep.time_budgets_s,
                rate.unwrap_or(cfg.rate_threshold_kbps),
                &opts,
            )?;
            write_report(common.out.as_deref(), &report)?;
            Ok(())
        }
        Command::BdRate { common, anchor, test } => {
            config(&common)?;
            let value = bd_rate(&load_curve_table(&anchor)?, &load_curve_table(&test)?)?;
            // Avoid printing "-0.00".
            let shown = if value.abs() < 0.005 { 0.0 } else { value };
            emit(common.out.as_deref(), &format!("{shown:.2}\n"))?;
            Ok(())
        }
        Command::Report { common, input } => {
            config(&common)?;
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let rendered = if let Ok(plan) = serde_json::from_str::<PlanOutput>(&text) {
                render_plan(&plan)
            } else {
                let report: SweepReport = serde_json::from_str(&text).map_err(Error::from)?;
                render_sweep(&report)
            };
            emit(common.out.as_deref(), &rendered)?;
            Ok(())
        }
    }
}

/// CSV to `out` (or stdout) and, when `out` is a path, JSON next to it.
fn write_report(out: Option<&Path>, report: &SweepReport) -> Result<()> {
    let csv = report.to_csv()?;
    emit(out, &csv)?;
    if let Some(p) = out {
        write_file(&p.with_extension("json"), &(report.to_json()? + "\n"))?;
    }
    Ok(())
}

fn render_plan(plan: &PlanOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "status {:?}, budgets {} kbps / {} s",
        plan.status, plan.budgets.rate_threshold_kbps, plan.budgets.time_threshold_s
    );
    let _ = writeln!(s, "{:<20} {:<10} {:>8} {:>10} {:>10}", "segment", "preset", "kbps", "time_s", "psnr_db");
    for seg in &plan.segments {
        let _ = writeln!(
            s,
            "{:<20} {:<10} {:>8} {:>10.4} {:>10.4}",
            seg.segment_id, seg.preset, seg.bitrate_kbps, seg.predicted_time_s, seg.predicted_psnr_db
        );
    }
    let _ = writeln!(
        s,
        "{:<20} {:<10} {:>8} {:>10.4} {:>10.4}",
        "total", "", plan.totals.rate_kbps, plan.totals.time_s, plan.totals.psnr_db
    );
    if let Some(d) = plan.diagnostics {
        let _ = writeln!(
            s,
            "minimum achievable: {} kbps, {:.4} s",
            d.min_total_rate_kbps, d.min_total_time_s
        );
    }
    s
}

fn render_sweep(report: &SweepReport) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:?} sweep, {} runs of {} segments, baseline {}",
        report.axis, report.runs, report.segments_per_run, report.baseline_preset
    );
    let _ = writeln!(
        s,
        "{:>10} {:>8} {:>9} {:>12} {:>12} {:>9} {:>8}  presets",
        "R_th", "T_th", "feasible", "planner_dB", "baseline_dB", "improved", "rank"
    );
    for r in &report.rows {
        let hist: Vec<String> = r.preset_histogram.iter().map(|(p, n)| format!("{p}={n}")).collect();
        let _ = writeln!(
            s,
            "{:>10} {:>8} {:>9} {:>12} {:>12} {:>9} {:>8}  {}",
            r.rate_threshold_kbps,
            r.time_threshold_s,
            r.planner_feasible,
            fmt(r.planner_mean_total_psnr_db),
            fmt(r.baseline_mean_total_psnr_db),
            r.strict_improvements,
            fmt(r.mean_speed_rank),
            hist.join(" ")
        );
    }
    if report.axis == crate::eval::SweepAxis::Rate {
        match report.bd_rate_vs_baseline() {
            Ok(bd) => {
                let _ = writeln!(s, "BD-rate vs baseline: {bd:.2}%");
            }
            Err(e) => {
                let _ = writeln!(s, "BD-rate unavailable: {e}");
            }
        }
    }
    s
}
