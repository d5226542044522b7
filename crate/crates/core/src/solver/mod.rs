//! One operating point per segment, maximising total PSNR subject to
//! Σ rate ≤ R_th and Σ time ≤ T_th (a two-resource multiple-choice knapsack).
//!
//! `solve_bb` is the production solver. `solve_bruteforce` enumerates every
//! assignment and serves as its oracle. Both break utility ties towards the
//! lexicographically smallest choice vector and accumulate totals in segment
//! order, so their answers agree bit for bit.

mod bb;
mod bound;
mod brute;
mod instance;

pub use bb::solve_bb;
pub use bound::{bound_upper, greedy_incumbent, lagrangian_bound, lagrangian_multipliers};
pub use brute::{solve_bruteforce, BRUTEFORCE_LIMIT};
pub use instance::{build_instance, InfeasibilityDiagnostics, PlanningInstance, Solution, SolveStatus};
