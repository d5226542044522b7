use super::instance::{PlanningInstance, Solution, SolveStatus};
use crate::domain::Budgets;

/// Relative slack granted to reserve checks so rounding in a differently
/// ordered sum can only loosen, never tighten, a bound.
const RESERVE_EPS: f64 = 1e-12;

fn fits(total: f64, budget: f64) -> bool {
    total <= budget + budget.abs() * RESERVE_EPS
}

/// Admissible upper bound on the best total utility reachable by extending
/// `prefix` (choices for segments `0..prefix.len()`).
///
/// Each remaining segment contributes its best utility among points that fit
/// the remaining slack in both budgets after reserving the cheapest option of
/// every other remaining segment. Returns `-inf` when no completion can fit
/// and the exact utility when the prefix is complete and feasible.
pub fn bound_upper(instance: &PlanningInstance, budgets: &Budgets, prefix: &[usize]) -> f64 {
    let l = instance.num_segments();
    assert!(prefix.len() <= l, "prefix longer than the instance");
    let (mut u, mut r, mut t) = (0.0, 0.0, 0.0);
    for (i, &j) in prefix.iter().enumerate() {
        u += instance.utility(i, j);
        r += instance.rate(i, j);
        t += instance.time(i, j);
    }
    if r > budgets.rate_threshold_kbps || t > budgets.time_threshold_s {
        return f64::NEG_INFINITY;
    }
    let rest = prefix.len()..l;
    let min_r: Vec<f64> = rest.clone().map(|i| row_min(instance.rate_row(i))).collect();
    let min_t: Vec<f64> = rest.clone().map(|i| row_min(instance.time_row(i))).collect();
    let reserve_r: f64 = min_r.iter().sum();
    let reserve_t: f64 = min_t.iter().sum();
    for (k, i) in rest.enumerate() {
        let others_r = r + (reserve_r - min_r[k]);
        let others_t = t + (reserve_t - min_t[k]);
        let best = (0..instance.num_points())
            .filter(|&j| {
                fits(others_r + instance.rate(i, j), budgets.rate_threshold_kbps)
                    && fits(others_t + instance.time(i, j), budgets.time_threshold_s)
            })
            .map(|j| instance.utility(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        u += best;
    }
    u
}

fn row_min(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Value of the Lagrangian dual at (λ, μ):
/// Σ_i max_j (u_ij − λ r_ij − μ t_ij) + λ R_th + μ T_th.
/// A multiplier on an infinite budget must be zero.
pub fn lagrangian_bound(instance: &PlanningInstance, budgets: &Budgets, lambda: f64, mu: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..instance.num_segments() {
        total += reduced_row_max(instance, i, lambda, mu);
    }
    total + budget_term(lambda, budgets.rate_threshold_kbps) + budget_term(mu, budgets.time_threshold_s)
}

pub(super) fn reduced_row_max(instance: &PlanningInstance, i: usize, lambda: f64, mu: f64) -> f64 {
    let (u, r, t) = (instance.utility_row(i), instance.rate_row(i), instance.time_row(i));
    let mut best = f64::NEG_INFINITY;
    for j in 0..u.len() {
        best = best.max(u[j] - lambda * r[j] - mu * t[j]);
    }
    best
}

pub(super) fn budget_term(multiplier: f64, budget: f64) -> f64 {
    if multiplier == 0.0 {
        0.0
    } else {
        multiplier * budget
    }
}

/// Approximate minimiser (λ, μ ≥ 0) of the Lagrangian dual, by alternating
/// golden-section searches. Any non-negative pair yields a valid bound; this
/// only makes it tight.
pub fn lagrangian_multipliers(instance: &PlanningInstance, budgets: &Budgets) -> (f64, f64) {
    let free_r = budgets.rate_threshold_kbps.is_infinite();
    let free_t = budgets.time_threshold_s.is_infinite();
    let (mut lambda, mut mu) = (0.0, 0.0);
    let spread = (0..instance.num_segments())
        .map(|i| {
            let row = instance.utility_row(i);
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - row_min(row)
        })
        .fold(0.0, f64::max)
        + 1e-9;
    let mean = |v: fn(&PlanningInstance, usize) -> &[f64]| {
        let n = instance.num_segments() * instance.num_points();
        (0..instance.num_segments()).map(|i| v(instance, i).iter().sum::<f64>()).sum::<f64>() / n as f64
    };
    let scale_r = spread / mean(PlanningInstance::rate_row);
    let scale_t = spread / mean(PlanningInstance::time_row);
    for _ in 0..4 {
        if !free_r {
            lambda = minimise_convex(|x| lagrangian_bound(instance, budgets, x, mu), scale_r);
        }
        if !free_t {
            mu = minimise_convex(|x| lagrangian_bound(instance, budgets, lambda, x), scale_t);
        }
    }
    (lambda, mu)
}

fn minimise_convex(f: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let mut hi = scale;
    let mut prev = f(0.0);
    for _ in 0..64 {
        let v = f(hi);
        if v >= prev {
            break;
        }
        prev = v;
        hi *= 2.0;
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    if f(0.0) <= f(x) {
        0.0
    } else {
        x
    }
}

/// Warm-start heuristic: walking segments in order, take the highest-utility
/// point (lowest index on ties) that costs at most an equal share of each
/// remaining budget. `None` when some segment has no such point or the result
/// overshoots a budget.
pub fn greedy_incumbent(instance: &PlanningInstance, budgets: &Budgets) -> Option<Solution> {
    let l = instance.num_segments();
    let mut choice = Vec::with_capacity(l);
    let (mut r, mut t) = (0.0, 0.0);
    for i in 0..l {
        let left = (l - i) as f64;
        let allow_r = (budgets.rate_threshold_kbps - r) / left;
        let allow_t = (budgets.time_threshold_s - t) / left;
        let mut best: Option<usize> = None;
        for j in 0..instance.num_points() {
            if instance.rate(i, j) <= allow_r
                && instance.time(i, j) <= allow_t
                && best.is_none_or(|b| instance.utility(i, j) > instance.utility(i, b))
            {
                best = Some(j);
            }
        }
        let j = best?;
        r += instance.rate(i, j);
        t += instance.time(i, j);
        choice.push(j);
    }
    let sol = Solution::from_choice(instance, choice, SolveStatus::Feasible, 0).ok()?;
    sol.within(budgets).then_some(sol)
}
