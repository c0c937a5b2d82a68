//! Finite-domain solver: interval-set domains, propagation, labeling and
//! branch-and-bound.

mod domain;
mod evaluate;
mod propagate;
mod search;
mod store;

pub use domain::Domain;
pub use evaluate::{eval_expr, evaluate, floor_mod, holds, Verdict};
pub use propagate::Propagator;
pub use search::{solve, solve_all, solve_optimal, Optimum, SearchConfig, Solution, SolveError, SolveOutcome};
pub use store::{Inconsistent, VarStore};
