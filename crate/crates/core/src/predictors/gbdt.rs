//! Least-squares gradient-boosted regression trees.
//!
//! Features are bucketed once into at most `max_bins` histogram bins (exact
//! midpoints when a feature has few distinct values), then each boosting
//! round grows a depth-limited tree on the current residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 2,
            max_bins: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Axis-aligned regression tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Boosted ensemble: `base + learning_rate * sum(tree leaves)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        self.base_prediction + self.learning_rate * sum
    }
}

/// Outcome of [`fit`]: the ensemble plus the training RMSE before the first
/// round and after every accepted round.
#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub ensemble: Ensemble,
    pub train_rmse: Vec<f64>,
}

struct Binned {
    /// Upper edge of each bin except the last; bin = #edges strictly below x.
    edges: Vec<Vec<f64>>,
    /// Row-major `rows x features` bin indices.
    bins: Vec<u16>,
    num_features: usize,
}

impl Binned {
    fn new(x: &[Vec<f64>], max_bins: usize) -> Self {
        let num_features = x[0].len();
        let mut edges = Vec::with_capacity(num_features);
        for f in 0..num_features {
            let mut vals: Vec<f64> = x.iter().map(|row| row[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let e: Vec<f64> = if vals.len() <= max_bins {
                vals.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
            } else {
                let mut e: Vec<f64> = (1..max_bins)
                    .map(|b| {
                        let pos = b * (vals.len() - 1) / max_bins;
                        vals[pos] + (vals[pos + 1] - vals[pos]) / 2.0
                    })
                    .collect();
                e.dedup();
                e
            };
            edges.push(e);
        }
        let mut bins = Vec::with_capacity(x.len() * num_features);
        for row in x {
            for (f, e) in edges.iter().enumerate() {
                bins.push(e.partition_point(|&t| t < row[f]) as u16);
            }
        }
        Binned {
            edges,
            bins,
            num_features,
        }
    }

    fn bin(&self, row: usize, f: usize) -> usize {
        self.bins[row * self.num_features + f] as usize
    }
}

struct Grower<'a> {
    data: &'a Binned,
    residual: &'a [f64],
    params: &'a GbdtParams,
    nodes: Vec<Node>,
    /// Scratch histograms (sum, count) sized to the widest feature.
    hist_sum: Vec<f64>,
    hist_cnt: Vec<usize>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.residual[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: sum / n as f64 });
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((feature, bin)) = self.best_split(rows, sum) else {
            return id;
        };
        let threshold = self.data.edges[feature][bin];
        let mut mid = 0;
        for i in 0..n {
            if self.data.bin(rows[i], feature) <= bin {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best (feature, bin) by squared-error reduction; first found wins ties.
    fn best_split(&mut self, rows: &[usize], total: f64) -> Option<(usize, usize)> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent = total * total / n as f64;
        let mut best: Option<(usize, usize)> = None;
        let mut best_gain = 0.0;
        for f in 0..self.data.num_features {
            let nb = self.data.edges[f].len() + 1;
            if nb < 2 {
                continue;
            }
            self.hist_sum[..nb].fill(0.0);
            self.hist_cnt[..nb].fill(0);
            for &r in rows {
                let b = self.data.bin(r, f);
                self.hist_sum[b] += self.residual[r];
                self.hist_cnt[b] += 1;
            }
            let (mut ls, mut lc) = (0.0, 0usize);
            for b in 0..nb - 1 {
                ls += self.hist_sum[b];
                lc += self.hist_cnt[b];
                if lc < min_leaf {
                    continue;
                }
                let rc = n - lc;
                if rc < min_leaf {
                    break;
                }
                if self.hist_cnt[b] == 0 {
                    continue;
                }
                let rs = total - ls;
                let gain = ls * ls / lc as f64 + rs * rs / rc as f64 - parent;
                if gain > best_gain * (1.0 + 1e-12) + 1e-300 {
                    best_gain = gain;
                    best = Some((f, b));
                }
            }
        }
        best
    }
}

/// Fits a least-squares GBDT to `(x, y)`. Rounds stop early once a tree no
/// longer lowers the training error, so `train_rmse` is non-increasing.
pub fn fit(x: &[Vec<f64>], y: &[f64], params: &GbdtParams) -> Result<GbdtFit> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid("GBDT needs a non-empty design matrix matching the targets"));
    }
    let width = x[0].len();
    if x.iter().any(|r| r.len() != width) {
        return Err(Error::invalid("ragged GBDT design matrix"));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("GBDT inputs must be finite"));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) || params.max_bins < 2 || params.max_bins > 65_536 {
        return Err(Error::invalid("GBDT learning rate must lie in (0, 1] and max_bins in 2..=65536"));
    }
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut residual: Vec<f64> = y.iter().map(|t| t - base).collect();
    let sse = |r: &[f64]| r.iter().map(|e| e * e).sum::<f64>();
    let mut current = sse(&residual);
    let mut train_rmse = vec![(current / n as f64).sqrt()];
    let mut trees = Vec::new();

    let data = if width > 0 { Some(Binned::new(x, params.max_bins)) } else { None };
    let widest = data
        .as_ref()
        .map(|d| d.edges.iter().map(|e| e.len() + 1).max().unwrap_or(1))
        .unwrap_or(1);
    let mut rows: Vec<usize> = (0..n).collect();
    let mut next_pred = vec![0.0; n];

    for _ in 0..params.rounds {
        let Some(data) = data.as_ref() else { break };
        rows.iter_mut().enumerate().for_each(|(i, r)| *r = i);
        let mut grower = Grower {
            data,
            residual: &residual,
            params,
            nodes: Vec::new(),
            hist_sum: vec![0.0; widest],
            hist_cnt: vec![0; widest],
        };
        grower.grow(&mut rows, 0);
        let tree = RegressionTree { nodes: grower.nodes };
        if tree.nodes.len() == 1 {
            break;
        }
        for i in 0..n {
            next_pred[i] = pred[i] + params.learning_rate * tree.leaf_value(&x[i]);
        }
        let next_sse: f64 = next_pred.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum();
        if !(next_sse < current) {
            break;
        }
        current = next_sse;
        std::mem::swap(&mut pred, &mut next_pred);
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        train_rmse.push((current / n as f64).sqrt());
        trees.push(tree);
    }

    Ok(GbdtFit {
        ensemble: Ensemble {
            base_prediction: base,
            learning_rate: params.learning_rate,
            trees,
        },
        train_rmse,
    })
}
