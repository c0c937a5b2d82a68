//! Depth-first labeling and branch-and-bound.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::evaluate::{evaluate, Verdict};
use super::propagate::Propagator;
use super::store::VarStore;
use super::Domain;
use crate::compiler::{Csp, Objective, VarId};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub max_solutions: usize,
    pub node_limit: Option<u64>,
    /// Checked at every node; setting it aborts the search.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_solutions: 1000, node_limit: None, cancel: None }
    }
}

impl SearchConfig {
    pub fn with_max_solutions(mut self, n: usize) -> Self {
        self.max_solutions = n.max(1);
        self
    }

    pub fn with_node_limit(mut self, n: u64) -> Self {
        self.node_limit = Some(n);
        self
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    pub values: Vec<i64>,
}

impl Solution {
    pub fn get(&self, v: VarId) -> i64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("no solution exists")]
    Unsatisfiable,
    #[error("node limit of {0} exceeded")]
    NodeLimitExceeded(u64),
    #[error("search cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub value: i64,
    /// First optimal solution in labeling order.
    pub best: Solution,
    /// Every optimal solution up to the configured cap.
    pub all: Vec<Solution>,
}

/// What a solve produced, whether or not the model has an objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    /// Empty when the model is unsatisfiable.
    pub solutions: Vec<Solution>,
    pub objective: Option<i64>,
    pub nodes: u64,
}

struct Search<'a> {
    csp: &'a Csp,
    prop: Propagator,
    cfg: &'a SearchConfig,
    nodes: u64,
    solutions: Vec<Solution>,
    /// Branch-and-bound state: objective and the current admissible range.
    bound: Option<(Objective, i64, i64)>,
    incumbent: Option<Solution>,
}

impl<'a> Search<'a> {
    fn new(csp: &'a Csp, cfg: &'a SearchConfig) -> Self {
        Search { csp, prop: Propagator::new(csp), cfg, nodes: 0, solutions: Vec::new(), bound: None, incumbent: None }
    }

    fn initial_store(&self) -> VarStore {
        VarStore::new(self.csp.vars.iter().map(|v| v.domain.clone()).collect())
    }

    fn tick(&mut self) -> Result<(), SolveError> {
        self.nodes += 1;
        if let Some(limit) = self.cfg.node_limit {
            if self.nodes > limit {
                return Err(SolveError::NodeLimitExceeded(limit));
            }
        }
        if let Some(flag) = &self.cfg.cancel {
            if flag.load(Ordering::Relaxed) {
                return Err(SolveError::Cancelled);
            }
        }
        Ok(())
    }

    /// Returns `true` when the search should stop.
    fn node(&mut self, store: &mut VarStore, changed: &[VarId]) -> Result<bool, SolveError> {
        self.tick()?;
        let mut changed = changed.to_vec();
        if let Some((obj, lo, hi)) = self.bound {
            match store.restrict(obj.var(), &Domain::range(lo, hi)) {
                Err(_) => return Ok(false),
                Ok(true) => changed.push(obj.var()),
                Ok(false) => {}
            }
        }
        if self.prop.propagate_from(store, &changed).is_err() {
            return Ok(false);
        }
        let Some(var) = (0..store.len()).map(VarId).find(|v| store.value(*v).is_none()) else {
            return Ok(self.record(store));
        };
        let dom = store.dom(var).clone();
        for value in dom.iter() {
            if let Some((obj, lo, hi)) = self.bound {
                // the incumbent may have tightened the bound since `dom` was read
                if obj.var() == var && (value < lo || value > hi) {
                    continue;
                }
            }
            let mark = store.mark();
            let stop = match store.set(var, Domain::singleton(value)) {
                Ok(_) => self.node(store, &[var])?,
                Err(_) => false,
            };
            store.restore(mark);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn record(&mut self, store: &VarStore) -> bool {
        let values: Vec<i64> = store.domains().iter().map(|d| d.value().expect("all assigned")).collect();
        debug_assert_eq!(evaluate(self.csp, &values), Verdict::Satisfied);
        if evaluate(self.csp, &values) != Verdict::Satisfied {
            return false;
        }
        let sol = Solution { values };
        if let Some((obj, lo, hi)) = self.bound {
            let b = sol.get(obj.var());
            self.bound = Some(match obj {
                Objective::Minimize(_) => (obj, lo, b.saturating_sub(1)),
                Objective::Maximize(_) => (obj, b.saturating_add(1), hi),
            });
            self.incumbent = Some(sol);
            return false;
        }
        self.solutions.push(sol);
        self.solutions.len() >= self.cfg.max_solutions
    }

    fn run(&mut self) -> Result<(), SolveError> {
        let mut store = self.initial_store();
        if store.domains().iter().any(Domain::is_empty) {
            return Ok(());
        }
        self.tick()?;
        if self.prop.propagate_all(&mut store).is_err() {
            return Ok(());
        }
        // The root node was already counted.
        self.nodes -= 1;
        self.node(&mut store, &[])?;
        Ok(())
    }
}

/// Enumerates solutions in labeling order: variables in declaration order,
/// values ascending. Any objective is ignored.
pub fn solve_all(csp: &Csp, cfg: &SearchConfig) -> Result<Vec<Solution>, SolveError> {
    let mut s = Search::new(csp, cfg);
    s.run()?;
    Ok(s.solutions)
}

fn optimize(csp: &Csp, cfg: &SearchConfig) -> Result<(Option<Optimum>, u64), SolveError> {
    let obj = csp.objective.expect("optimize requires an objective");
    let mut s = Search::new(csp, cfg);
    s.bound = Some((obj, i64::MIN, i64::MAX));
    s.run()?;
    let mut nodes = s.nodes;
    let Some(incumbent) = s.incumbent else { return Ok((None, nodes)) };
    let value = incumbent.get(obj.var());

    let mut fixed = csp.clone();
    fixed.vars[obj.var().0].domain = Domain::singleton(value);
    let rest = SearchConfig {
        node_limit: cfg.node_limit.map(|n| n.saturating_sub(nodes)),
        ..cfg.clone()
    };
    let mut e = Search::new(&fixed, &rest);
    e.run()?;
    nodes += e.nodes;
    let all = e.solutions;
    let best = all.first().cloned().unwrap_or(incumbent);
    Ok((Some(Optimum { value, best, all }), nodes))
}

/// Branch-and-bound on the objective, then enumeration of every solution
/// attaining the optimum.
pub fn solve_optimal(csp: &Csp, cfg: &SearchConfig) -> Result<Optimum, SolveError> {
    optimize(csp, cfg)?.0.ok_or(SolveError::Unsatisfiable)
}

/// Dispatches on whether the model has an objective.
pub fn solve(csp: &Csp, cfg: &SearchConfig) -> Result<SolveOutcome, SolveError> {
    if csp.objective.is_some() {
        let (opt, nodes) = optimize(csp, cfg)?;
        return Ok(match opt {
            Some(o) => SolveOutcome { solutions: o.all, objective: Some(o.value), nodes },
            None => SolveOutcome { solutions: Vec::new(), objective: None, nodes },
        });
    }
    let mut s = Search::new(csp, cfg);
    s.run()?;
    Ok(SolveOutcome { solutions: s.solutions, objective: None, nodes: s.nodes })
}
