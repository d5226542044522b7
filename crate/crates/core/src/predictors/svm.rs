//! One-vs-rest C-SVM with a degree-2 polynomial kernel, trained by SMO with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::domain::Preset;
use crate::error::{Error, Result};
use crate::features::{SegmentFeatures, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Box constraint on the dual coefficients.
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    /// Iteration cap, in multiples of the training-set size (at least 100 rows).
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 100,
        }
    }
}

/// A segment and the R-D cluster its measured curve fell into under `preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDRow {
    pub features: SegmentFeatures,
    pub preset: Preset,
    pub cluster_label: usize,
}

/// Per-feature z-score parameters. Zero-variance columns keep a unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let d = x.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for row in x {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) || !s.is_finite() {
                *s = 1.0;
            }
        });
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// `(gamma * <a, b> + 1)^2`
pub fn poly2_kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let v = gamma * dot + 1.0;
    v * v
}

/// Binary decision function `sum(coef_i * K(sv_i, x)) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    /// Maximal KKT violation when training stopped.
    pub kkt_gap: f64,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, gamma: f64, z: &[f64]) -> f64 {
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * poly2_kernel(gamma, sv, z))
            .sum();
        s - self.rho
    }
}

/// Raw SMO result over a precomputed kernel matrix.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub kkt_gap: f64,
    pub iterations: usize,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0, 0 <= a <= c` with
/// `Q_ij = y_i y_j K_ij`. `kernel` is row-major `n x n`.
pub fn smo(kernel: &[f64], y: &[f64], params: &SvmParams) -> SmoSolution {
    const TAU: f64 = 1e-12;
    let n = y.len();
    let c = params.c;
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_passes.max(1) * n.max(100);
    let mut iterations = 0;
    let mut gap;

    loop {
        // i maximises -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = if i_sel.is_some() && gmin.is_finite() { gmax - gmin } else { 0.0 };
        let (Some(i), Some(j)) = (i_sel, j_sel) else { break };
        if gap < params.tol || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let mut quad = k(i, i) + k(j, j) + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = k(i, i) + k(j, j) - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb, mut sum_free, mut nr_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 {
        sum_free / nr_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    SmoSolution {
        alpha,
        rho,
        kkt_gap: gap,
        iterations,
    }
}

/// Per-preset R-D class predictor.
///
/// A training set with a single label yields a degenerate model
/// (`classifiers` empty) that always answers that label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDClassModel {
    pub preset: Preset,
    pub feature_indices: Vec<usize>,
    pub standardizer: Standardizer,
    pub gamma: f64,
    /// Distinct training labels, ascending; `classifiers[c]` separates `classes[c]` from the rest.
    pub classes: Vec<usize>,
    pub classifiers: Vec<BinarySvm>,
}

impl RDClassModel {
    /// One-vs-rest decision score per entry of `classes`.
    pub fn scores(&self, features: &SegmentFeatures) -> Vec<f64> {
        let z = self.standardizer.apply(&features.select(&self.feature_indices));
        self.classifiers.iter().map(|m| m.decision(self.gamma, &z)).collect()
    }
}

pub fn train_rd_classifier(rows: &[RDRow], feature_indices: &[usize], params: &SvmParams) -> Result<RDClassModel> {
    let first = rows.first().ok_or_else(|| Error::invalid("no training rows"))?;
    if rows.iter().any(|r| r.preset != first.preset) {
        return Err(Error::invalid("R-D classifier rows mix presets"));
    }
    if feature_indices.is_empty() || feature_indices.iter().any(|&i| i >= NUM_FEATURES) {
        return Err(Error::invalid("classifier needs valid, non-empty feature indices"));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::invalid("SVM C and tolerance must be positive"));
    }
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.features.select(feature_indices)).collect();
    let standardizer = Standardizer::fit(&raw);
    let z: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.apply(x)).collect();
    let gamma = 1.0 / feature_indices.len() as f64;

    let mut classes: Vec<usize> = rows.iter().map(|r| r.cluster_label).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut classifiers = Vec::new();
    if classes.len() > 1 {
        let n = z.len();
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = poly2_kernel(gamma, &z[i], &z[j]);
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
        }
        for &class in &classes {
            let y: Vec<f64> = rows.iter().map(|r| if r.cluster_label == class { 1.0 } else { -1.0 }).collect();
            let sol = smo(&kernel, &y, params);
            let (mut support_vectors, mut dual_coef) = (Vec::new(), Vec::new());
            for (t, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    support_vectors.push(z[t].clone());
                    dual_coef.push(a * y[t]);
                }
            }
            classifiers.push(BinarySvm {
                support_vectors,
                dual_coef,
                rho: sol.rho,
                kkt_gap: sol.kkt_gap,
                iterations: sol.iterations,
            });
        }
    }
    Ok(RDClassModel {
        preset: first.preset,
        feature_indices: feature_indices.to_vec(),
        standardizer,
        gamma,
        classes,
        classifiers,
    })
}

/// Argmax of the one-vs-rest scores; the lowest class id wins ties.
pub fn classify_rd(model: &RDClassModel, features: &SegmentFeatures) -> usize {
    if model.classifiers.is_empty() {
        return model.classes.first().copied().unwrap_or(0);
    }
    let scores = model.scores(features);
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    model.classes[best]
}
