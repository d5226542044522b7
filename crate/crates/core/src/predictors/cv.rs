use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbdt::GbdtParams;
use super::metrics::mape;
use super::time::{predict_time, train_time_regressor, TimeRow};
use crate::error::{Error, Result};

/// Seeded k-fold partition of `0..n`. The first `n % k` folds hold one extra
/// row; every index lands in exactly one fold.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k-fold needs k >= 2"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    pub folds: Vec<f64>,
    pub mean: f64,
}

/// Trains on k-1 folds and scores on the held-out fold, for every fold in order.
pub fn kfold_cv<R, M>(
    rows: &[R],
    k: usize,
    seed: u64,
    mut train: impl FnMut(&[R]) -> Result<M>,
    mut score: impl FnMut(&M, &[R]) -> Result<f64>,
) -> Result<CvScores>
where
    R: Clone,
{
    let folds = kfold_indices(rows.len(), k, seed)?;
    let mut in_fold = vec![0usize; rows.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_fold[i] = f;
        }
    }
    let mut scores = Vec::with_capacity(k);
    for (f, idx) in folds.iter().enumerate() {
        let training: Vec<R> = rows
            .iter()
            .zip(&in_fold)
            .filter(|(_, &g)| g != f)
            .map(|(r, _)| r.clone())
            .collect();
        let validation: Vec<R> = idx.iter().map(|&i| rows[i].clone()).collect();
        let model = train(&training)?;
        scores.push(score(&model, &validation)?);
    }
    let mean = scores.iter().sum::<f64>() / k as f64;
    Ok(CvScores { folds: scores, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvReport {
    pub selected: Vec<usize>,
    /// Feature set and mean CV loss after each accepted step, starting with the full set.
    pub history: Vec<(Vec<usize>, f64)>,
}

/// Greedy backward elimination scored by mean k-fold CV loss (lower is better).
///
/// Each step tries removing every remaining feature, keeps the removal with
/// the lowest loss (the highest feature index on ties) and accepts it if the
/// loss does not get worse. At least one feature always survives.
pub fn rfecv<R, M>(
    rows: &[R],
    candidates: &[usize],
    folds: usize,
    seed: u64,
    mut train: impl FnMut(&[R], &[usize]) -> Result<M>,
    mut score: impl FnMut(&M, &[R]) -> Result<f64>,
) -> Result<RfecvReport>
where
    R: Clone,
{
    if candidates.len() < 2 {
        return Err(Error::invalid("feature elimination needs at least two candidates"));
    }
    let mut eval = |features: &[usize]| -> Result<f64> {
        Ok(kfold_cv(rows, folds, seed, |tr| train(tr, features), &mut score)?.mean)
    };
    let mut current = candidates.to_vec();
    let mut current_loss = eval(&current)?;
    let mut history = vec![(current.clone(), current_loss)];
    while current.len() > 1 {
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..current.len() {
            let trial: Vec<usize> = current.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &f)| f).collect();
            let loss = eval(&trial)?;
            let better = match best {
                None => true,
                Some((bp, bl)) => loss < bl || (loss == bl && current[pos] > current[bp]),
            };
            if better {
                best = Some((pos, loss));
            }
        }
        let (pos, loss) = best.expect("at least two features remain");
        if loss > current_loss {
            break;
        }
        current.remove(pos);
        current_loss = loss;
        history.push((current.clone(), current_loss));
    }
    Ok(RfecvReport {
        selected: current,
        history,
    })
}

/// RFECV for one preset's time regressor, scored by per-row MAPE.
pub fn select_time_features(
    rows: &[TimeRow],
    candidates: &[usize],
    params: &GbdtParams,
    folds: usize,
    seed: u64,
) -> Result<RfecvReport> {
    rfecv(
        rows,
        candidates,
        folds,
        seed,
        |tr, feats| train_time_regressor(tr, feats, params),
        |model, val| {
            let pred = val
                .iter()
                .map(|r| predict_time(model, &r.features, r.target_bitrate_kbps))
                .collect::<Result<Vec<_>>>()?;
            let actual: Vec<f64> = val.iter().map(|r| r.transcode_time_s).collect();
            mape(&pred, &actual)
        },
    )
}
