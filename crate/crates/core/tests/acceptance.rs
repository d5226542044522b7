//! Acceptance checks, one line per criterion. Run with
//! `cargo test --test acceptance`; exits non-zero if any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use presetplan::domain::{Budgets, OperatingGrid, Preset};
use presetplan::eval::{baseline_plan, bd_rate, bd_rate_points, sample_segments, sweep_rate_budget, sweep_time_budget};
use presetplan::features::{feature_index, FeatureMask, SegmentFeatures};
use presetplan::io::Config;
use presetplan::pipeline::{train_all, ModelSet};
use presetplan::predictors::metrics::mape;
use presetplan::predictors::{
    classify_rd, kfold_indices, predict_time, train_rd_classifier, train_time_regressor_traced, GbdtParams, RDRow,
    SvmParams, TimeRow,
};
use presetplan::rdmodel::{kmeans_cluster, KMeansParams, RDCurve};
use presetplan::solver::{build_instance, solve_bb, solve_bruteforce, PlanningInstance, SolveStatus};
use presetplan::synth::{gen_corpus, Archetype, SynthParams, SyntheticCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct World {
    cfg: Config,
    grid: OperatingGrid,
    corpus: SyntheticCorpus,
    features: Vec<SegmentFeatures>,
    models: ModelSet,
}

/// Default config, default synthetic corpus, models trained on it.
fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| {
        let cfg = Config::default();
        let grid = cfg.grid().unwrap();
        let corpus = gen_corpus(&cfg.synth_params(), &grid).unwrap();
        let models = train_all(&corpus.time_rows, &corpus.rd_records, &cfg.training_params()).unwrap();
        let features = corpus.features();
        World {
            cfg,
            grid,
            corpus,
            features,
            models,
        }
    })
}

fn random_instance(rng: &mut ChaCha8Rng) -> (PlanningInstance, Budgets) {
    let l = rng.gen_range(1..=5);
    let m = rng.gen_range(2..=8);
    let mut mat = || -> Vec<Vec<f64>> { (0..l).map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect()).collect() };
    let (u, r, t) = (mat(), mat(), mat());
    let max_total = |m: &[Vec<f64>]| m.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>();
    let (rmax, tmax) = (max_total(&r), max_total(&t));
    let inst = PlanningInstance::from_matrices(u, r, t).unwrap();
    let (rmin, tmin) = inst.min_totals();
    // Anywhere from slightly below the cheapest plan up to the costliest one.
    let mut budget = |lo: f64, hi: f64| {
        if rng.gen_bool(0.1) {
            lo * 0.95
        } else {
            lo + rng.gen_range(0.0..1.0) * (hi - lo)
        }
    };
    let b = Budgets::new(budget(rmin, rmax), budget(tmin, tmax)).unwrap();
    (inst, b)
}

fn ac1_solver_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<_> = (0..200).map(|_| random_instance(&mut rng)).collect();
    let start = Instant::now();
    let mut infeasible = 0;
    for (n, (inst, b)) in cases.iter().enumerate() {
        let bb = solve_bb(inst, b);
        let bf = solve_bruteforce(inst, b).map_err(|e| e.to_string())?;
        ensure!(bb.status == bf.status, "instance {n}: status {:?} vs {:?}", bb.status, bf.status);
        ensure!(bb.total_utility == bf.total_utility, "instance {n}: utility {} vs {}", bb.total_utility, bf.total_utility);
        ensure!(bb.choice == bf.choice, "instance {n}: choice {:?} vs {:?}", bb.choice, bf.choice);
        infeasible += (bb.status == SolveStatus::Infeasible) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "suite took {secs:.2} s");
    Ok(format!("200/200 identical ({infeasible} infeasible), {secs:.3} s"))
}

fn ac2_latency() -> Result<String, String> {
    let w = world();
    let b = Budgets::standard();
    let mut times = Vec::with_capacity(100);
    for run in 0..100 {
        let idx = sample_segments(w.features.len(), 6, 7, run).unwrap();
        let segs: Vec<SegmentFeatures> = idx.iter().map(|&i| w.features[i].clone()).collect();
        let inst = build_instance(&segs, &w.grid, &w.models).map_err(|e| e.to_string())?;
        ensure!(inst.num_segments() == 6 && inst.num_points() == 50, "instance shape");
        let start = Instant::now();
        let sol = solve_bb(&inst, &b);
        times.push(start.elapsed().as_secs_f64() * 1e3);
        ensure!(sol.status == SolveStatus::Optimal, "run {run}: {:?}", sol.status);
    }
    times.sort_by(f64::total_cmp);
    let median = (times[49] + times[50]) / 2.0;
    ensure!(median <= 20.0, "median {median:.3} ms");
    Ok(format!("median {median:.3} ms, max {:.3} ms", times[99]))
}

fn ac3_dominance() -> Result<String, String> {
    let w = world();
    let b = Budgets::standard();
    let opts = w.cfg.sweep_options();
    let full = build_instance(&w.features, &w.grid, &w.models).map_err(|e| e.to_string())?;
    let (mut feasible_base, mut violations, mut strict) = (0u64, 0u64, 0u64);
    for run in 0..opts.runs as u64 {
        let idx = sample_segments(full.num_segments(), 6, opts.seed, run).unwrap();
        let inst = full.subset(&idx).map_err(|e| e.to_string())?;
        let plan = solve_bb(&inst, &b);
        let base = baseline_plan(&inst, Preset::Veryfast, 5000, Some(&b)).map_err(|e| e.to_string())?;
        if base.is_feasible() {
            feasible_base += 1;
            if !plan.is_feasible() || plan.total_utility < base.total_utility {
                violations += 1;
            } else if plan.total_utility > base.total_utility {
                strict += 1;
            }
        }
    }
    let report = sweep_rate_budget(&w.features, &w.grid, &w.models, &[30000.0], 11.0, &opts).map_err(|e| e.to_string())?;
    let row = &report.rows[0];
    ensure!(row.baseline_bitrate_kbps == Some(5000), "baseline bitrate {:?}", row.baseline_bitrate_kbps);
    ensure!(
        (row.baseline_feasible, row.dominance_violations, row.strict_improvements) == (feasible_base, violations, strict),
        "sweep counters disagree with the direct recount"
    );
    ensure!(feasible_base > 0, "baseline never feasible");
    ensure!(violations == 0, "{violations} dominance violations");
    let share = strict as f64 / opts.runs as f64;
    ensure!(share >= 0.5, "strict improvements in {strict}/{} runs", opts.runs);
    Ok(format!(
        "{} runs, baseline feasible in {feasible_base}, 0 violations, strict improvement in {strict} ({:.1}%)",
        opts.runs,
        share * 100.0
    ))
}

fn ac4_bd_rate_units() -> Result<String, String> {
    let ladder = presetplan::domain::DEFAULT_BITRATES_KBPS.to_vec();
    let psnr: Vec<f64> = ladder.iter().map(|&r| 12.0 + 3.1 * (r as f64).ln()).collect();
    let a = RDCurve::new(ladder.clone(), psnr.clone()).unwrap();
    let same = bd_rate(&a, &a).map_err(|e| e.to_string())?;
    ensure!(same.abs() <= 1e-9, "identical curves gave {same}");

    let rates: Vec<f64> = ladder.iter().map(|&r| r as f64).collect();
    let doubled: Vec<f64> = rates.iter().map(|r| 2.0 * r).collect();
    let d = bd_rate_points(&rates, &psnr, &doubled, &psnr).map_err(|e| e.to_string())?;
    ensure!((d - 100.0).abs() <= 0.1, "doubled rate gave {d}");

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    for n in 0..50 {
        // Random increasing curves starting within 2 dB of each other, so the
        // PSNR ranges always overlap.
        let curve = |rng: &mut ChaCha8Rng| {
            let (mut r, mut p) = (rng.gen_range(150.0..300.0), rng.gen_range(28.0..30.0));
            let mut pts = (Vec::new(), Vec::new());
            for _ in 0..rng.gen_range(4..=10) {
                pts.0.push(r);
                pts.1.push(p);
                r *= rng.gen_range(1.3..2.5);
                p += rng.gen_range(0.8..4.0);
            }
            pts
        };
        let ((ra, pa), (rb, pb)) = (curve(&mut rng), curve(&mut rng));
        let ab = bd_rate_points(&ra, &pa, &rb, &pb).map_err(|e| e.to_string())?;
        let ba = bd_rate_points(&rb, &pb, &ra, &pa).map_err(|e| e.to_string())?;
        // (1 + ab/100)(1 + ba/100) = 1 exactly when both use the same overlap
        let lhs = (1.0 + ab / 100.0) * (1.0 + ba / 100.0);
        let rel = (lhs - 1.0).abs();
        ensure!(rel <= 1e-6, "pair {n}: ({ab}, {ba}) product {lhs}");
        worst = worst.max(rel);
    }
    Ok(format!("identical {same:.1e}, doubled {d:.6}%, antisymmetry worst {worst:.1e}"))
}

fn ac5_sweep_direction() -> Result<String, String> {
    let w = world();
    let axis = &w.cfg.sweep.rate_budgets_kbps;
    let report = sweep_rate_budget(&w.features, &w.grid, &w.models, axis, 11.0, &w.cfg.sweep_options())
        .map_err(|e| e.to_string())?;
    let bd = report.bd_rate_vs_baseline().map_err(|e| e.to_string())?;
    ensure!(bd < 0.0, "BD-rate {bd:.3}%");
    Ok(format!("{} budgets from {} to {} kbps, BD-rate {bd:.2}%", axis.len(), axis[0], axis[axis.len() - 1]))
}

fn ac6_clustering() -> Result<String, String> {
    let w = world();
    let corpus = gen_corpus(&SynthParams::new(606, 1000), &w.grid).map_err(|e| e.to_string())?;
    let curves: Vec<RDCurve> = corpus
        .rd_records
        .iter()
        .filter(|r| r.preset == Preset::Fast)
        .map(|r| r.curve.clone())
        .collect();
    ensure!(curves.len() == 1000, "{} curves", curves.len());
    let params = KMeansParams::default();
    let fit = kmeans_cluster(Preset::Fast, &curves, &params).map_err(|e| e.to_string())?;
    let tr = &fit.inertia_trace;
    if let Some(i) = (1..tr.len()).find(|&i| tr[i] > tr[i - 1]) {
        return Err(format!("inertia rose at iteration {i}: {} -> {}", tr[i - 1], tr[i]));
    }

    let one = kmeans_cluster(Preset::Fast, &curves, &KMeansParams { k: 1, ..params }).map_err(|e| e.to_string())?;
    let dim = curves[0].psnr_db().len();
    for d in 0..dim {
        let mean = curves.iter().map(|c| c.psnr_db()[d]).sum::<f64>() / curves.len() as f64;
        let got = one.model.centroids[0][d];
        ensure!((got - mean).abs() <= 1e-9, "k=1 centroid[{d}] {got} vs mean {mean}");
    }

    let reference = serde_json::to_string(&fit.model).unwrap();
    for _ in 0..5 {
        let again = kmeans_cluster(Preset::Fast, &curves, &params).map_err(|e| e.to_string())?;
        ensure!(serde_json::to_string(&again.model).unwrap() == reference, "model differs between runs");
        ensure!(again.assignments == fit.assignments, "assignments differ between runs");
    }
    Ok(format!("k={} inertia trace of {} steps non-increasing, k=1 mean ok, 5 reruns identical", params.k, tr.len()))
}

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

fn ac7_regression() -> Result<String, String> {
    let w = world();
    let params = w.cfg.training_params();
    let idx = params.mask.time_indices();
    let mut runs = 0;
    for preset in Preset::ALL {
        let rows: Vec<TimeRow> = w.corpus.time_rows.iter().filter(|r| r.preset == preset).cloned().collect();
        let (_, trace) = train_time_regressor_traced(&rows, &idx, &params.gbdt).map_err(|e| e.to_string())?;
        ensure!(non_increasing(&trace), "{preset}: training RMSE rose");
        runs += 1;
    }

    // Noiseless t = 0.1 + 1e-4 * bitrate + 1e-7 * mv_count.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ladder = presetplan::domain::DEFAULT_BITRATES_KBPS;
    let rows: Vec<TimeRow> = (0..500)
        .map(|i| {
            let mut f = w.features[i % w.features.len()].clone();
            f.segment_id = format!("n{i}");
            f.mv_count = rng.gen_range(0.0..1e6);
            let bitrate = ladder[rng.gen_range(0..ladder.len())];
            TimeRow {
                transcode_time_s: 0.1 + 1e-4 * bitrate as f64 + 1e-7 * f.mv_count,
                features: f,
                preset: Preset::Fast,
                target_bitrate_kbps: bitrate,
            }
        })
        .collect();
    let (train, test) = rows.split_at(400);
    let mv = [feature_index("mv_count").unwrap()];
    let (model, trace) = train_time_regressor_traced(train, &mv, &GbdtParams::default()).map_err(|e| e.to_string())?;
    ensure!(non_increasing(&trace), "noiseless run: training RMSE rose");
    runs += 1;
    let predicted: Vec<f64> = test
        .iter()
        .map(|r| predict_time(&model, &r.features, r.target_bitrate_kbps))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let actual: Vec<f64> = test.iter().map(|r| r.transcode_time_s).collect();
    let err = mape(&predicted, &actual).map_err(|e| e.to_string())?;
    ensure!(err <= 0.05, "held-out MAPE {err:.4}");
    Ok(format!("{runs} RMSE traces non-increasing, noiseless held-out MAPE {err:.4}"))
}

fn ac8_classification() -> Result<String, String> {
    let w = world();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // mv_mean > 0 exactly for class 1, with a wide gap between the classes.
    let rows: Vec<RDRow> = (0..200)
        .map(|i| {
            let mut f = w.features[i % w.features.len()].clone();
            let positive = i % 2 == 0;
            f.mv_mean = if positive { rng.gen_range(5.0..10.0) } else { 0.0 };
            RDRow {
                features: f,
                preset: Preset::Fast,
                cluster_label: positive as usize,
            }
        })
        .collect();
    let model = train_rd_classifier(&rows, &FeatureMask::default().rd_indices(), &SvmParams::default())
        .map_err(|e| e.to_string())?;
    let correct = rows.iter().filter(|r| classify_rd(&model, &r.features) == r.cluster_label).count();
    let acc = correct as f64 / rows.len() as f64;
    ensure!(acc >= 0.99, "training accuracy {acc:.3}");

    let mut sizes = Vec::new();
    for _ in 0..20 {
        let n = rng.gen_range(5..2000);
        let folds = kfold_indices(n, 5, rng.gen()).map_err(|e| e.to_string())?;
        ensure!(folds.len() == 5, "n={n}: {} folds", folds.len());
        let mut seen = vec![false; n];
        for f in &folds {
            ensure!(f.len() == n / 5 || f.len() == n.div_ceil(5), "n={n}: fold of {}", f.len());
            for &i in f {
                ensure!(i < n && !seen[i], "n={n}: index {i} repeated or out of range");
                seen[i] = true;
            }
        }
        ensure!(seen.iter().all(|&s| s), "n={n}: folds do not cover every row");
        sizes.push(n);
    }
    Ok(format!("separable accuracy {acc:.3}, 5-fold invariants on sizes {sizes:?}"))
}

fn ac9_infeasibility() -> Result<String, String> {
    let w = world();
    let budgets = &w.cfg.sweep.time_budgets_s;
    ensure!(budgets == &[11.0, 8.0, 5.0, 3.0], "time axis {budgets:?}");
    let slow: Vec<f64> = w
        .corpus
        .time_rows
        .iter()
        .filter(|r| r.preset == Preset::Slow)
        .map(|r| r.transcode_time_s)
        .collect();
    let slow_mean = slow.iter().sum::<f64>() / slow.len() as f64;
    ensure!(slow_mean > 1.0, "mean slow-preset time {slow_mean:.3} s");

    let opts = w.cfg.sweep_options();
    let rate = w.cfg.rate_threshold_kbps;
    let report = sweep_time_budget(&w.features, &w.grid, &w.models, budgets, rate, &opts).map_err(|e| e.to_string())?;
    let ranks: Vec<f64> = report.rows.iter().map(|r| r.mean_speed_rank.unwrap_or(f64::NAN)).collect();
    ensure!(ranks.windows(2).all(|p| p[1] <= p[0]), "mean speed rank {ranks:?}");
    // Share of choices among the k fastest presets never drops as T_th tightens.
    let shares: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            let total: u64 = r.preset_histogram.values().sum();
            let mut acc = 0;
            Preset::ALL
                .iter()
                .map(|p| {
                    acc += r.preset_histogram.get(p).copied().unwrap_or(0);
                    acc as f64 / total as f64
                })
                .collect()
        })
        .collect();
    for k in 0..Preset::ALL.len() {
        ensure!(
            shares.windows(2).all(|p| p[1][k] >= p[0][k]),
            "share of the {} fastest presets not monotone: {:?}",
            k + 1,
            shares.iter().map(|s| s[k]).collect::<Vec<_>>()
        );
    }

    let sports = gen_corpus(&SynthParams::only(w.cfg.seed, w.cfg.synth.num_segments, Archetype::Sports), &w.grid)
        .map_err(|e| e.to_string())?;
    let hard = sweep_time_budget(&sports.features(), &w.grid, &w.models, &[3.0], rate, &opts).map_err(|e| e.to_string())?;
    let infeasible = hard.rows[0].planner_infeasible;
    ensure!(infeasible > 0, "sports corpus feasible in every run at 3 s");
    let ranks_txt: Vec<String> = ranks.iter().map(|r| format!("{r:.2}")).collect();
    Ok(format!(
        "slow mean {slow_mean:.2} s, speed rank {} over T_th {budgets:?}, sports infeasible {infeasible}/{} at 3 s",
        ranks_txt.join(" > "),
        opts.runs
    ))
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = format!(
        "[paths]\ndata_dir = {:?}\nmodels = {:?}\nreports_dir = {:?}\n",
        dir.join("data"),
        dir.join("models.json"),
        dir.join("reports")
    );
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
    let c = cfg_path.to_str().unwrap();
    let data = dir.join("data");
    let out = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-data".into(), "--out".into(), data.to_str().unwrap().into()],
        vec!["cluster".into()],
        vec!["train-time".into()],
        vec!["train-rd".into()],
        vec!["plan".into(), "--out".into(), out("plan.json")],
        vec!["sweep-rate".into(), "--out".into(), out("rate.csv")],
        vec!["sweep-time".into(), "--out".into(), out("time.csv")],
    ];
    for step in steps {
        let mut argv = vec!["presetplan".to_string()];
        argv.extend(step.iter().cloned());
        argv.extend(["--config".to_string(), c.to_string()]);
        let code = presetplan::cli::run(argv);
        ensure!(code == 0, "{} exited {code}", step[0]);
    }
    ["models.json", "plan.json", "rate.csv", "rate.json", "time.csv", "time.json"]
        .iter()
        .map(|n| std::fs::read(dir.join(n)).map(|b| (n.to_string(), b)).map_err(|e| format!("{n}: {e}")))
        .collect()
}

fn ac10_determinism() -> Result<String, String> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure!(x == y, "{name} differs between runs");
        ensure!(!x.is_empty(), "{name} is empty");
    }
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    Ok(format!("byte-identical: {}", names.join(", ")))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("AC1 solver exactness", ac1_solver_exactness),
        ("AC2 solve latency at 6x50", ac2_latency),
        ("AC3 dominance over baseline", ac3_dominance),
        ("AC4 BD-rate units", ac4_bd_rate_units),
        ("AC5 BD-rate sweep direction", ac5_sweep_direction),
        ("AC6 clustering", ac6_clustering),
        ("AC7 regression", ac7_regression),
        ("AC8 classification", ac8_classification),
        ("AC9 infeasibility behaviour", ac9_infeasibility),
        ("AC10 end-to-end determinism", ac10_determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
