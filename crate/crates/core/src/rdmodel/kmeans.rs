use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{fit_log_curve, LogCurve, RDCurve};
use crate::domain::Preset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves further than this (Euclidean, dB).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 6,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Clustered R-D behaviour of one preset. `centroids[c]` is sampled on
/// `bitrates_kbps`; `fitted[c]` is its least-squares [`LogCurve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub preset: Preset,
    pub k: usize,
    pub bitrates_kbps: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    pub fitted: Vec<LogCurve>,
    pub inertia: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
    /// Inertia after every assignment step, in order. Non-increasing.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance; lowest id wins ties.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (label, p) in labels.iter_mut().zip(points) {
        let (c, d) = nearest(p, centroids);
        *label = c;
        inertia += d;
    }
    inertia
}

fn kmeans_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = i;
                    break;
                }
            }
            // Guard against rounding leaving `pick` on a zero-weight point.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding over the PSNR vectors of `curves`.
///
/// An empty cluster is re-seeded with the training curve farthest from its
/// own updated centroid, which keeps the inertia trace non-increasing.
pub fn kmeans_cluster(preset: Preset, curves: &[RDCurve], params: &KMeansParams) -> Result<ClusterFit> {
    let KMeansParams { k, seed, max_iter, tol } = *params;
    let first = curves.first().ok_or_else(|| Error::invalid("k-means needs at least one curve"))?;
    if curves.iter().any(|c| c.bitrates_kbps() != first.bitrates_kbps()) {
        return Err(Error::invalid("all curves must share one bitrate grid"));
    }
    if k == 0 || k > curves.len() {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={}", curves.len())));
    }
    let points: Vec<&[f64]> = curves.iter().map(|c| c.psnr_db()).collect();
    let dim = first.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        trace.push(assign(&points, &centroids, &mut labels));

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        let mut updated: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| {
                if n == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|x| x / n as f64).collect()
                }
            })
            .collect();
        if counts.contains(&0) {
            let mut far: Vec<f64> = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| sq_dist(p, &updated[l]))
                .collect();
            for c in (0..k).filter(|&c| counts[c] == 0) {
                // Farthest point, lowest index on ties.
                let mut best = 0;
                for i in 1..far.len() {
                    if far[i] > far[best] {
                        best = i;
                    }
                }
                updated[c] = points[best].to_vec();
                far[best] = f64::NEG_INFINITY;
            }
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < tol {
            break;
        }
    }
    let inertia = assign(&points, &centroids, &mut labels);
    trace.push(inertia);

    let rates: Vec<f64> = first.bitrates_kbps().iter().map(|&r| r as f64).collect();
    let fitted = centroids
        .iter()
        .map(|c| fit_log_curve(&rates, c))
        .collect::<Result<Vec<_>>>()?;

    Ok(ClusterFit {
        model: ClusterModel {
            preset,
            k,
            bitrates_kbps: first.bitrates_kbps().to_vec(),
            centroids,
            fitted,
            inertia,
            seed,
        },
        assignments: labels,
        inertia_trace: trace,
        iterations,
    })
}

/// Index of the centroid nearest to `curve`; ties go to the lowest id.
pub fn assign_cluster(curve: &RDCurve, model: &ClusterModel) -> Result<usize> {
    if curve.bitrates_kbps() != model.bitrates_kbps.as_slice() {
        return Err(Error::invalid("curve bitrate grid does not match the cluster model"));
    }
    Ok(nearest(curve.psnr_db(), &model.centroids).0)
}
