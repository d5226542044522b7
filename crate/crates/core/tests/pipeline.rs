use std::collections::BTreeMap;
use std::sync::OnceLock;

use presetplan::domain::{build_operating_grid, Budgets, OperatingGrid, Preset};
use presetplan::io::{decode_models, encode_models, load_models, save_models};
use presetplan::pipeline::{train_all, ModelSet, TrainingParams};
use presetplan::predictors::{classify_rd, predict_time};
use presetplan::rdmodel::eval_curve;
use presetplan::solver::{build_instance, lagrangian_bound, lagrangian_multipliers, solve_bb, PlanningInstance, SolveStatus};
use presetplan::synth::{gen_corpus, SynthParams, SyntheticCorpus};
use presetplan::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Fixture {
    grid: OperatingGrid,
    corpus: SyntheticCorpus,
    models: ModelSet,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let grid = OperatingGrid::standard();
        let corpus = gen_corpus(&SynthParams::new(21, 120), &grid).unwrap();
        let params = TrainingParams {
            gbdt: presetplan::predictors::GbdtParams {
                rounds: 60,
                ..Default::default()
            },
            ..TrainingParams::default()
        };
        let models = train_all(&corpus.time_rows, &corpus.rd_records, &params).unwrap();
        Fixture { grid, corpus, models }
    })
}

#[test]
fn six_segments_fill_six_by_fifty() {
    let f = fixture();
    let segs = &f.corpus.features()[..6];
    let inst = build_instance(segs, &f.grid, &f.models).unwrap();
    assert_eq!((inst.num_segments(), inst.num_points()), (6, 50));
    for (i, seg) in segs.iter().enumerate() {
        for p in f.grid.points() {
            let j = p.index;
            let class = classify_rd(f.models.rd_classifier(p.preset).unwrap(), seg);
            let curve = f.models.cluster_model(p.preset).unwrap().fitted[class];
            assert_eq!(inst.utility(i, j), eval_curve(&curve, p.bitrate_kbps as f64).unwrap());
            assert_eq!(inst.rate(i, j), p.bitrate_kbps as f64);
            let t = predict_time(f.models.time_model(p.preset).unwrap(), seg, p.bitrate_kbps).unwrap();
            assert_eq!(inst.time(i, j), t);
        }
    }
}

#[test]
fn one_segment_one_point() {
    let f = fixture();
    let grid = build_operating_grid(&[Preset::Fast], &[1000]).unwrap();
    let inst = build_instance(&f.corpus.features()[..1], &grid, &f.models).unwrap();
    assert_eq!((inst.num_segments(), inst.num_points()), (1, 1));
}

#[test]
fn missing_preset_model_is_an_error() {
    let f = fixture();
    let mut models = f.models.clone();
    models.time_models.remove(&Preset::Slow);
    let err = build_instance(&f.corpus.features()[..2], &f.grid, &models).unwrap_err();
    assert!(matches!(err, Error::MissingModel { preset: Preset::Slow, .. }), "{err}");
}

#[test]
fn saved_models_predict_identically() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_models(&path, &f.models).unwrap();
    let back = load_models(&path).unwrap();
    assert_eq!(back, f.models);
    let probes = gen_corpus(&SynthParams::new(99, 100), &f.grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seg in probes.features() {
        let p = Preset::ALL[rng.gen_range(0..5)];
        let r = f.grid.bitrates_kbps()[rng.gen_range(0..10)];
        let a = predict_time(f.models.time_model(p).unwrap(), &seg, r).unwrap();
        let b = predict_time(back.time_model(p).unwrap(), &seg, r).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(
            classify_rd(f.models.rd_classifier(p).unwrap(), &seg),
            classify_rd(back.rd_classifier(p).unwrap(), &seg)
        );
        let sa = f.models.rd_classifier(p).unwrap().scores(&seg);
        let sb = back.rd_classifier(p).unwrap().scores(&seg);
        assert!(sa.iter().zip(&sb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let bytes = encode_models(&f.models).unwrap();
    assert!(matches!(decode_models(&bytes[..bytes.len() / 2]), Err(Error::Checksum { .. })));
}

#[test]
fn veryslow_centroids_beat_ultrafast() {
    let f = fixture();
    let mean_centroid = |p: Preset| -> Vec<f64> {
        let m = f.models.cluster_model(p).unwrap();
        let n = m.centroids.len() as f64;
        (0..m.bitrates_kbps.len())
            .map(|k| m.centroids.iter().map(|c| c[k]).sum::<f64>() / n)
            .collect()
    };
    let slow = mean_centroid(Preset::Veryslow);
    let fast = mean_centroid(Preset::Ultrafast);
    assert!(slow.iter().zip(&fast).all(|(s, f)| s >= f), "{slow:?} vs {fast:?}");
}

/// Independent exact oracle: dynamic programming over integer total rate,
/// keeping a Pareto frontier of (time, utility) per rate.
fn pareto_dp(inst: &PlanningInstance, b: &Budgets) -> Option<f64> {
    let mut states: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::from([(0, vec![(0.0, 0.0)])]);
    for i in 0..inst.num_segments() {
        let mut next: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for (&rate, front) in &states {
            for j in 0..inst.num_points() {
                let r = rate + inst.rate(i, j) as u64;
                if r as f64 > b.rate_threshold_kbps {
                    continue;
                }
                for &(t, u) in front {
                    let t2 = t + inst.time(i, j);
                    if t2 <= b.time_threshold_s + 1e-9 {
                        next.entry(r).or_default().push((t2, u + inst.utility(i, j)));
                    }
                }
            }
        }
        for front in next.values_mut() {
            front.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)));
            let mut kept: Vec<(f64, f64)> = Vec::new();
            for p in front.drain(..) {
                if kept.last().is_none_or(|k| p.1 > k.1) {
                    kept.push(p);
                }
            }
            *front = kept;
        }
        states = next;
    }
    states
        .values()
        .flat_map(|f| f.iter().map(|p| p.1))
        .fold(None, |acc: Option<f64>, u| Some(acc.map_or(u, |a| a.max(u))))
}

#[test]
fn six_by_fifty_instances_are_solved_to_optimality() {
    let f = fixture();
    let feats = f.corpus.features();
    let budgets = Budgets::standard();
    for w in 0..10 {
        let inst = build_instance(&feats[w * 6..w * 6 + 6], &f.grid, &f.models).unwrap();
        let sol = solve_bb(&inst, &budgets);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.total_rate <= 30000.0 && sol.total_time <= 11.0);
        let oracle = pareto_dp(&inst, &budgets).unwrap();
        assert!((sol.total_utility - oracle).abs() < 1e-9, "window {w}: {} vs {oracle}", sol.total_utility);
        let (lam, mu) = lagrangian_multipliers(&inst, &budgets);
        let dual = lagrangian_bound(&inst, &budgets, lam, mu);
        assert!(dual >= sol.total_utility - 1e-9);
    }
}
