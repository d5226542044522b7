use super::instance::{PlanningInstance, Solution, SolveStatus};
use crate::domain::Budgets;
use crate::error::{Error, Result};

/// Largest M^L the enumerator accepts.
pub const BRUTEFORCE_LIMIT: f64 = 1e7;

/// Enumerates every assignment in lexicographic order and keeps the first
/// one with the highest utility among those within budget.
pub fn solve_bruteforce(instance: &PlanningInstance, budgets: &Budgets) -> Result<Solution> {
    let l = instance.num_segments();
    let m = instance.num_points();
    let size = (m as f64).powi(l as i32);
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let mut choice = vec![0usize; l];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        let (u, r, t) = instance.totals(&choice)?;
        if r <= budgets.rate_threshold_kbps
            && t <= budgets.time_threshold_s
            && best.as_ref().is_none_or(|(bu, _)| u > *bu)
        {
            best = Some((u, choice.clone()));
        }
        // Odometer increment, last segment fastest.
        let mut pos = l;
        loop {
            if pos == 0 {
                return match best {
                    Some((_, c)) => Solution::from_choice(instance, c, SolveStatus::Optimal, visited),
                    None => Ok(Solution::infeasible(instance, visited)),
                };
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < m {
                break;
            }
            choice[pos] = 0;
        }
    }
}
