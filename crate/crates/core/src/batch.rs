//! Independent solves over many models at once.
//!
//! With the `parallel` feature (on by default) the work is spread over the
//! rayon pool; [`sequential`] is always available and gives identical results.

use crate::compiler::Csp;
use crate::fdsolver::{evaluate, solve, SearchConfig, Solution, SolveError, SolveOutcome, Verdict};

pub mod sequential {
    use super::*;

    pub fn solve_many(models: &[Csp], cfg: &SearchConfig) -> Vec<Result<SolveOutcome, SolveError>> {
        models.iter().map(|m| solve(m, cfg)).collect()
    }

    pub fn check_solutions(csp: &Csp, solutions: &[Solution]) -> Vec<Verdict> {
        solutions.iter().map(|s| evaluate(csp, &s.values)).collect()
    }
}

#[cfg(feature = "parallel")]
pub mod parallel {
    use rayon::prelude::*;

    use super::*;

    pub fn solve_many(models: &[Csp], cfg: &SearchConfig) -> Vec<Result<SolveOutcome, SolveError>> {
        models.par_iter().map(|m| solve(m, cfg)).collect()
    }

    pub fn check_solutions(csp: &Csp, solutions: &[Solution]) -> Vec<Verdict> {
        solutions.par_iter().map(|s| evaluate(csp, &s.values)).collect()
    }
}

#[cfg(feature = "parallel")]
pub use parallel::{check_solutions, solve_many};
#[cfg(not(feature = "parallel"))]
pub use sequential::{check_solutions, solve_many};
