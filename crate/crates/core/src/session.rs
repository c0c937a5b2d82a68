//! The build / next / previous / original-state loop over one workbook.
//!
//! A build is split into [`Session::begin_build`], [`BuildJob::run`] and
//! [`Session::complete_build`] so a caller can run the solve off-thread and
//! cancel it; [`Session::parse_build`] does all three in place.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::compiler::{compile, Compiled};
use crate::error::{CompileError, Diagnostic};
use crate::fdsolver::{solve, SearchConfig, Solution, SolveError, SolveOutcome};
use crate::grid::{CellAddr, GridSnapshot, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum View {
    Original,
    ShowingSolution,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("the model has no solution")]
    Unsatisfiable,
    #[error("{0}")]
    Solve(SolveError),
    #[error("no solutions yet; run a build first")]
    NoSolutions,
    #[error("the workbook changed while the build was running")]
    Stale,
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Compile(e) => e.code(),
            SessionError::Unsatisfiable => "UNSAT",
            SessionError::Solve(SolveError::Unsatisfiable) => "UNSAT",
            SessionError::Solve(SolveError::NodeLimitExceeded(_)) => "NODE_LIMIT_EXCEEDED",
            SessionError::Solve(SolveError::Cancelled) => "CANCELLED",
            SessionError::NoSolutions => "NO_SOLUTIONS",
            SessionError::Stale => "STALE_BUILD",
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            SessionError::Compile(e) => e.to_diagnostic(),
            other => Diagnostic::new(other.code(), other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Status {
    pub view: View,
    /// 1-based; 0 before any successful build.
    pub cursor: usize,
    pub solution_count: usize,
    pub can_next: bool,
    pub can_prev: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<i64>,
}

/// A compiled model ready to solve, detached from the session.
#[derive(Debug, Clone)]
pub struct BuildJob {
    compiled: Compiled,
    config: SearchConfig,
    generation: u64,
}

impl BuildJob {
    pub fn compiled(&self) -> &Compiled {
        &self.compiled
    }

    pub fn run(&self, cancel: Option<Arc<AtomicBool>>) -> Result<SolveOutcome, SolveError> {
        let mut cfg = self.config.clone();
        if cancel.is_some() {
            cfg.cancel = cancel;
        }
        solve(&self.compiled.csp, &cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    workbook: Workbook,
    original: GridSnapshot,
    solutions: Vec<Solution>,
    var_cells: Vec<Option<CellAddr>>,
    objective: Option<i64>,
    cursor: usize,
    view: View,
    diagnostics: Vec<Diagnostic>,
    config: SearchConfig,
    /// Bumped whenever cached results stop matching the workbook.
    generation: u64,
}

impl Session {
    pub fn new(workbook: Workbook) -> Self {
        Session::with_config(workbook, SearchConfig::default())
    }

    pub fn with_config(workbook: Workbook, config: SearchConfig) -> Self {
        let original = workbook.snapshot();
        Session {
            workbook,
            original,
            solutions: Vec::new(),
            var_cells: Vec::new(),
            objective: None,
            cursor: 0,
            view: View::Original,
            diagnostics: Vec::new(),
            config,
            generation: 0,
        }
    }

    pub fn workbook(&self) -> &Workbook {
        &self.workbook
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn solution_count(&self) -> usize {
        self.solutions.len()
    }

    pub fn objective(&self) -> Option<i64> {
        self.objective
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn original(&self) -> &GridSnapshot {
        &self.original
    }

    /// Cell of each model variable, in declaration order.
    pub fn var_cells(&self) -> &[Option<CellAddr>] {
        &self.var_cells
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn can_next(&self) -> bool {
        let n = self.solutions.len();
        n >= 1 && (self.view == View::Original || self.cursor < n)
    }

    pub fn can_prev(&self) -> bool {
        !self.solutions.is_empty() && (self.view == View::Original || self.cursor > 1)
    }

    pub fn status(&self) -> Status {
        Status {
            view: self.view,
            cursor: self.cursor,
            solution_count: self.solutions.len(),
            can_next: self.can_next(),
            can_prev: self.can_prev(),
            objective: self.objective,
        }
    }

    /// Swaps in a new workbook and forgets every cached result.
    pub fn replace_workbook(&mut self, workbook: Workbook) {
        *self = Session { generation: self.generation + 1, ..Session::with_config(workbook, self.config.clone()) };
    }

    /// Edits one cell. Cached solutions no longer describe the grid, so they are dropped.
    pub fn set_cell(&mut self, addr: CellAddr, text: &str) {
        self.original_state();
        self.workbook.set(addr, text);
        let wb = self.workbook.clone();
        self.replace_workbook(wb);
    }

    pub fn parse_build(&mut self) -> Result<Status, SessionError> {
        let job = self.begin_build()?;
        let result = job.run(None);
        self.complete_build(&job, result)
    }

    /// Restores and snapshots the grid, then compiles it.
    pub fn begin_build(&mut self) -> Result<BuildJob, SessionError> {
        self.original_state();
        self.original = self.workbook.snapshot();
        self.generation += 1;
        self.solutions.clear();
        self.var_cells.clear();
        self.objective = None;
        self.cursor = 0;
        self.diagnostics.clear();
        match compile(&self.workbook) {
            Ok(compiled) => Ok(BuildJob { compiled, config: self.config.clone(), generation: self.generation }),
            Err(e) => {
                let e = SessionError::Compile(e);
                self.diagnostics.push(e.to_diagnostic());
                Err(e)
            }
        }
    }

    pub fn complete_build(
        &mut self,
        job: &BuildJob,
        result: Result<SolveOutcome, SolveError>,
    ) -> Result<Status, SessionError> {
        if job.generation != self.generation {
            return Err(SessionError::Stale);
        }
        let err = match result {
            Ok(out) if !out.solutions.is_empty() => {
                self.var_cells = job.compiled.csp.vars.iter().map(|v| v.cell).collect();
                self.solutions = out.solutions;
                self.objective = out.objective;
                self.cursor = 1;
                self.show_current();
                return Ok(self.status());
            }
            Ok(_) | Err(SolveError::Unsatisfiable) => SessionError::Unsatisfiable,
            Err(e) => SessionError::Solve(e),
        };
        self.diagnostics.push(err.to_diagnostic());
        Err(err)
    }

    /// Drops results from a build in flight so its completion is ignored.
    pub fn abandon_build(&mut self) {
        self.generation += 1;
    }

    pub fn next_solution(&mut self) -> Result<Status, SessionError> {
        self.step(1)
    }

    pub fn previous_solution(&mut self) -> Result<Status, SessionError> {
        self.step(-1)
    }

    fn step(&mut self, delta: isize) -> Result<Status, SessionError> {
        if self.solutions.is_empty() {
            return Err(SessionError::NoSolutions);
        }
        if self.view == View::ShowingSolution {
            let n = self.solutions.len() as isize;
            self.cursor = (self.cursor as isize + delta).clamp(1, n) as usize;
        }
        self.show_current();
        Ok(self.status())
    }

    pub fn original_state(&mut self) -> Status {
        if self.view == View::ShowingSolution {
            self.workbook.restore(&self.original).expect("snapshot taken from this workbook");
            self.view = View::Original;
        }
        self.status()
    }

    fn show_current(&mut self) {
        let sol = self.solutions[self.cursor - 1].clone();
        self.write_solution(&sol);
        self.view = View::ShowingSolution;
    }

    /// Overlays `sol` onto the original grid: variable cells get plain integers.
    pub fn write_solution(&mut self, sol: &Solution) {
        self.workbook.restore(&self.original).expect("snapshot taken from this workbook");
        for (cell, v) in self.var_cells.iter().zip(&sol.values) {
            if let Some(a) = cell {
                self.workbook.set(*a, v.to_string());
            }
        }
    }

    /// The workbook as it was before any solution was written into it.
    pub fn original_workbook(&self) -> Workbook {
        let mut wb = self.workbook.clone();
        wb.restore(&self.original).expect("snapshot taken from this workbook");
        wb
    }

    /// The grid the session should be displaying, rebuilt from scratch.
    pub fn expected_grid(&self) -> Workbook {
        let mut wb = self.original_workbook();
        if self.view == View::ShowingSolution {
            for (cell, v) in self.var_cells.iter().zip(&self.solutions[self.cursor - 1].values) {
                if let Some(a) = cell {
                    wb.set(*a, v.to_string());
                }
            }
        }
        wb
    }
}
