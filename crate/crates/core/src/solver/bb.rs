use std::cmp::Ordering;

use super::bound::{budget_term, greedy_incumbent, lagrangian_multipliers, reduced_row_max};
use super::instance::{PlanningInstance, Solution, SolveStatus};
use crate::domain::Budgets;

const RESERVE_EPS: f64 = 1e-12;
/// Relative padding on floating-point bounds so rounding never prunes an optimum.
const BOUND_MARGIN: f64 = 1e-9;

/// Exact depth-first branch-and-bound.
///
/// Segments are branched in index order and, within a segment, points in
/// descending utility (ascending index on ties). A node is pruned when a
/// partial total exceeds its budget, when the cheapest completion cannot fit,
/// or when the smaller of two upper bounds (sum of remaining row maxima, and
/// the Lagrangian dual at root multipliers) cannot beat the incumbent. The
/// greedy heuristic seeds the incumbent.
pub fn solve_bb(instance: &PlanningInstance, budgets: &Budgets) -> Solution {
    let l = instance.num_segments();
    let (min_r, min_t) = instance.min_totals();
    if min_r > budgets.rate_threshold_kbps || min_t > budgets.time_threshold_s {
        return Solution::infeasible(instance, 0);
    }

    let order: Vec<Vec<usize>> = (0..l)
        .map(|i| {
            let row = instance.utility_row(i);
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let (lambda, mu) = lagrangian_multipliers(instance, budgets);
    let mut suffix_max_u = vec![0.0; l + 1];
    let mut suffix_min_r = vec![0.0; l + 1];
    let mut suffix_min_t = vec![0.0; l + 1];
    let mut suffix_red = vec![0.0; l + 1];
    for i in (0..l).rev() {
        let fold_min = |row: &[f64]| row.iter().copied().fold(f64::INFINITY, f64::min);
        suffix_max_u[i] = suffix_max_u[i + 1] + instance.utility(i, order[i][0]);
        suffix_min_r[i] = suffix_min_r[i + 1] + fold_min(instance.rate_row(i));
        suffix_min_t[i] = suffix_min_t[i + 1] + fold_min(instance.time_row(i));
        suffix_red[i] = suffix_red[i + 1] + reduced_row_max(instance, i, lambda, mu);
    }
    let scale = 1.0
        + suffix_max_u[0].abs()
        + suffix_red[0].abs()
        + budget_term(lambda, budgets.rate_threshold_kbps).abs()
        + budget_term(mu, budgets.time_threshold_s).abs();

    let mut search = Search {
        instance,
        budgets,
        order,
        suffix_max_u,
        suffix_min_r,
        suffix_min_t,
        suffix_red,
        lambda,
        mu,
        margin: BOUND_MARGIN * scale,
        choice: vec![0; l],
        best_u: f64::NEG_INFINITY,
        best: None,
        nodes: 0,
    };
    if let Some(g) = greedy_incumbent(instance, budgets) {
        search.best_u = g.total_utility;
        search.best = Some(g.choice);
    }
    search.dfs(0, 0.0, 0.0, 0.0);

    let nodes = search.nodes;
    match search.best {
        Some(choice) => Solution::from_choice(instance, choice, SolveStatus::Optimal, nodes)
            .expect("search only produces in-range choices"),
        None => Solution::infeasible(instance, nodes),
    }
}

struct Search<'a> {
    instance: &'a PlanningInstance,
    budgets: &'a Budgets,
    order: Vec<Vec<usize>>,
    suffix_max_u: Vec<f64>,
    suffix_min_r: Vec<f64>,
    suffix_min_t: Vec<f64>,
    suffix_red: Vec<f64>,
    lambda: f64,
    mu: f64,
    margin: f64,
    choice: Vec<usize>,
    best_u: f64,
    best: Option<Vec<usize>>,
    nodes: u64,
}

impl Search<'_> {
    fn dfs(&mut self, d: usize, u: f64, r: f64, t: f64) {
        let inst = self.instance;
        let (rb, tb) = (self.budgets.rate_threshold_kbps, self.budgets.time_threshold_s);
        let last = d + 1 == inst.num_segments();
        for k in 0..self.order[d].len() {
            let j = self.order[d][k];
            self.nodes += 1;
            let u2 = u + inst.utility(d, j);
            let r2 = r + inst.rate(d, j);
            let t2 = t + inst.time(d, j);
            if last {
                // Later siblings cannot exceed this utility.
                if u2 < self.best_u {
                    break;
                }
                if r2 > rb || t2 > tb {
                    continue;
                }
                self.choice[d] = j;
                let better = match &self.best {
                    None => true,
                    Some(b) => u2 > self.best_u || (u2 == self.best_u && self.choice < *b),
                };
                if better {
                    self.best_u = u2;
                    self.best = Some(self.choice.clone());
                }
                continue;
            }
            let plain = u2 + self.suffix_max_u[d + 1] + self.margin;
            if plain < self.best_u {
                break;
            }
            if r2 > rb || t2 > tb {
                continue;
            }
            if r2 + self.suffix_min_r[d + 1] > rb + rb.abs() * RESERVE_EPS
                || t2 + self.suffix_min_t[d + 1] > tb + tb.abs() * RESERVE_EPS
            {
                continue;
            }
            let lag = u2
                + self.suffix_red[d + 1]
                + budget_term(self.lambda, rb - r2)
                + budget_term(self.mu, tb - t2)
                + self.margin;
            let bound = plain.min(lag);
            if bound < self.best_u {
                continue;
            }
            self.choice[d] = j;
            if bound == self.best_u && self.prefix_after_incumbent(d) {
                continue;
            }
            self.dfs(d + 1, u2, r2, t2);
        }
    }

    /// Whether `choice[..=d]` sorts after the incumbent's first d+1 entries.
    fn prefix_after_incumbent(&self, d: usize) -> bool {
        match &self.best {
            None => false,
            Some(b) => self.choice[..=d].cmp(&b[..=d]) == Ordering::Greater,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_bruteforce;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, l: usize, m: usize, ties: bool) -> PlanningInstance {
        let mut mat = |lo: f64, hi: f64| -> Vec<Vec<f64>> {
            (0..l)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            let v: f64 = rng.gen_range(lo..hi);
                            if ties {
                                v.round()
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let u = mat(1.0, 6.0);
        let r = mat(1.0, 10.0);
        let t = mat(1.0, 5.0);
        PlanningInstance::from_matrices(u, r, t).unwrap()
    }

    fn same(a: &Solution, b: &Solution) -> bool {
        a.status == b.status && a.total_utility == b.total_utility && a.choice == b.choice
    }

    #[test]
    fn matches_bruteforce_including_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..300 {
            let l = rng.gen_range(1..=5);
            let m = rng.gen_range(2..=6);
            let inst = random_instance(&mut rng, l, m, case % 2 == 0);
            let b = Budgets::new(rng.gen_range(1.0..8.0) * l as f64, rng.gen_range(1.0..4.0) * l as f64).unwrap();
            let bf = solve_bruteforce(&inst, &b).unwrap();
            let bb = solve_bb(&inst, &b);
            assert!(same(&bf, &bb), "case {case}: {bf:?} vs {bb:?}");
        }
    }

    #[test]
    fn hand_cases() {
        let inst = PlanningInstance::from_matrices(
            vec![vec![10.0, 20.0], vec![10.0, 20.0]],
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let s = solve_bb(&inst, &Budgets::new(3.0, 10.0).unwrap());
        assert_eq!((s.choice, s.total_utility), (vec![0, 1], 30.0));
        let s = solve_bb(&inst, &Budgets::new(1.5, 10.0).unwrap());
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert_eq!(s.diagnostics.unwrap().min_total_rate_kbps, 2.0);
    }

    #[test]
    fn unconstrained_is_row_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(&mut rng, 6, 50, true);
        let s = solve_bb(&inst, &Budgets::unconstrained());
        for (i, &j) in s.choice.iter().enumerate() {
            let row = inst.utility_row(i);
            let first_max = (0..row.len()).find(|&k| row.iter().all(|&v| v <= row[k])).unwrap();
            assert_eq!(j, first_max);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn budget_monotonicity_and_determinism(seed in any::<u64>(), rb in 5.0f64..30.0, tb in 4.0f64..15.0, grow in 1.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, 4, 6, false);
            let small = Budgets::new(rb, tb).unwrap();
            let a = solve_bb(&inst, &small);
            prop_assert_eq!(&a, &solve_bb(&inst, &small));
            let wider_r = solve_bb(&inst, &Budgets::new(rb * grow, tb).unwrap());
            let wider_t = solve_bb(&inst, &Budgets::new(rb, tb * grow).unwrap());
            if a.is_feasible() {
                prop_assert!(a.within(&small));
                prop_assert_eq!(a.choice.len(), 4);
                prop_assert!(wider_r.total_utility >= a.total_utility);
                prop_assert!(wider_t.total_utility >= a.total_utility);
                // Dominance over every feasible single-column assignment.
                for j in 0..6 {
                    let (u, r, t) = inst.totals(&[j; 4]).unwrap();
                    if r <= rb && t <= tb {
                        prop_assert!(a.total_utility >= u);
                    }
                }
            }
        }
    }
}
