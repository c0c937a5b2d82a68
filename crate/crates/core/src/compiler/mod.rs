//! Lowers a workbook into a [`Csp`] and renders the equivalent CLP(FD) program.

mod ir;

use std::collections::{HashMap, HashSet};
use std::fmt;

pub use ir::{Csp, CspConstraint, CspVar, DisplayConstraint, Expr, Objective, Term, VarId};

use crate::error::{CompileError, CompileErrorKind};
use crate::fdsolver::Domain;
use crate::grid::{clean_cell_text, CellAddr, RangeSpec, Workbook};
use crate::rangekit::{self, AddrGroups};
use crate::sslang::{
    find_markers, marker_kind_of, parse_constraint, parse_domain_literal, ArithExpr, BinArithOp, ConstraintAst,
    DomainLiteral, RelOp, ResultListSpec,
};

/// One line of the emitted program body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    /// `A1 #= 200`
    DomainEq { var: String, value: i64 },
    /// `A1 in 1..3`, `A1 in [1,2,3]`, or with `list` set, `[A1,B1] in 1..3`.
    DomainIn { vars: Vec<String>, list: bool, domain: String },
    AllDifferent(Vec<String>),
    SubListAllDifferent(Vec<Vec<String>>),
    SubListAggregate { op: BinArithOp, groups: Vec<Vec<String>>, rel: RelOp, rhs: Vec<String> },
    PairsAggregate { left: Vec<String>, op: BinArithOp, right: Vec<String>, rel: RelOp, rhs: Vec<String> },
    NthElement { index: String, table: Vec<String>, value: String },
    Arith(String),
}

fn list(items: &[String]) -> String {
    format!("[{}]", items.join(","))
}

fn nested(groups: &[Vec<String>]) -> String {
    let parts: Vec<String> = groups.iter().map(|g| list(g)).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::DomainEq { var, value } => write!(f, "{var} #= {value}"),
            Goal::DomainIn { vars, list: true, domain } => write!(f, "{} in {domain}", list(vars)),
            Goal::DomainIn { vars, list: false, domain } => write!(f, "{} in {domain}", vars.join(",")),
            Goal::AllDifferent(vs) => write!(f, "all_different({})", list(vs)),
            Goal::SubListAllDifferent(gs) => write!(f, "subListAllDifferent({})", nested(gs)),
            Goal::SubListAggregate { op, groups, rel, rhs } => {
                write!(f, "subListAggregate({op}, {}, {rel}, {})", nested(groups), list(rhs))
            }
            Goal::PairsAggregate { left, op, right, rel, rhs } => {
                write!(f, "pairsAggregate({}, {op}, {}, {rel}, {})", list(left), list(right), list(rhs))
            }
            Goal::NthElement { index, table, value } => write!(f, "nthElement({index}, {}, {value})", list(table)),
            Goal::Arith(text) => f.write_str(text),
        }
    }
}

/// The result of compiling a workbook.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub csp: Csp,
    /// Program body in emission order.
    pub goals: Vec<Goal>,
    /// Cell that produced each entry of `csp.constraints`.
    pub origins: Vec<CellAddr>,
}

impl Compiled {
    pub fn to_clp(&self) -> String {
        let names: Vec<String> = self.csp.vars.iter().map(|v| v.name.clone()).collect();
        let vars = list(&names);
        let obj = match self.csp.objective {
            None => String::new(),
            Some(Objective::Minimize(v)) => format!("min({})", self.csp.var(v).name),
            Some(Objective::Maximize(v)) => format!("max({})", self.csp.var(v).name),
        };
        let mut out = String::new();
        out.push_str(":- use_module(library(bounds)).\n");
        out.push_str(":- use_module(library(excel)).\n\n");
        out.push_str(&format!("mainQuery({vars}):-\n"));
        for g in &self.goals {
            out.push_str(&format!("    {g},\n"));
        }
        out.push_str(&format!("    labeling([{obj}], {vars}).\n"));
        out
    }
}

pub fn compile(wb: &Workbook) -> Result<Compiled, CompileError> {
    Lowering::new(wb).run()
}

pub fn build_csp(wb: &Workbook) -> Result<Csp, CompileError> {
    compile(wb).map(|c| c.csp)
}

pub fn emit_clp(wb: &Workbook) -> Result<String, CompileError> {
    compile(wb).map(|c| c.to_clp())
}

struct Lowering<'a> {
    wb: &'a Workbook,
    vars: HashMap<CellAddr, VarId>,
    cells: Vec<CellAddr>,
    domains: Vec<Option<Domain>>,
    constraints: Vec<CspConstraint>,
    origins: Vec<CellAddr>,
    goals: Vec<Goal>,
    objective: Option<Objective>,
    /// Cell being lowered, for error locations.
    at: CellAddr,
}

impl<'a> Lowering<'a> {
    fn new(wb: &'a Workbook) -> Self {
        Lowering {
            wb,
            vars: HashMap::new(),
            cells: Vec::new(),
            domains: Vec::new(),
            constraints: Vec::new(),
            origins: Vec::new(),
            goals: Vec::new(),
            objective: None,
            at: CellAddr::new(0, 1, 1),
        }
    }

    fn err(&self, kind: CompileErrorKind) -> CompileError {
        CompileError::at(kind, self.wb.qualified_addr(self.at))
    }

    fn name(&self, a: CellAddr) -> String {
        self.wb.var_name(a, self.wb.active())
    }

    fn run(mut self) -> Result<Compiled, CompileError> {
        let (var_decl, cons_decl) = find_markers(self.wb)?;

        for range in &var_decl.ranges {
            for a in rangekit::flatten(range) {
                if !self.vars.contains_key(&a) {
                    self.vars.insert(a, VarId(self.cells.len()));
                    self.cells.push(a);
                    self.domains.push(None);
                }
            }
        }

        for i in 0..self.cells.len() {
            let a = self.cells[i];
            let Some(text) = self.wb.get(a) else { continue };
            self.at = a;
            let lit = parse_domain_literal(text).map_err(|e| self.err(CompileErrorKind::Parse(e)))?;
            let name = self.name(a);
            let (dom, goal) = match lit {
                DomainLiteral::SingleValue(k) => (Domain::singleton(k), Goal::DomainEq { var: name, value: k }),
                DomainLiteral::Interval(lo, hi) => {
                    (Domain::range(lo, hi), Goal::DomainIn { vars: vec![name], list: false, domain: lit.to_string() })
                }
                DomainLiteral::ValueSet(ref vs) => (
                    Domain::from_values(vs.iter().copied()),
                    Goal::DomainIn { vars: vec![name], list: false, domain: lit.to_string() },
                ),
            };
            self.domains[i] = Some(dom);
            self.goals.push(goal);
        }

        let mut seen = HashSet::new();
        for range in &cons_decl.ranges {
            for a in rangekit::flatten(range) {
                if !seen.insert(a) {
                    continue;
                }
                let Some(text) = self.wb.get(a) else { continue };
                if clean_cell_text(text).is_empty() || marker_kind_of(text).is_some() {
                    continue;
                }
                self.at = a;
                let ast = parse_constraint(text, self.wb, a.sheet).map_err(|e| self.err(CompileErrorKind::Parse(e)))?;
                self.lower(&ast)?;
            }
        }

        let mut vars = Vec::with_capacity(self.cells.len());
        for (i, a) in self.cells.iter().enumerate() {
            let Some(domain) = self.domains[i].take() else {
                let kind = CompileErrorKind::UnboundedVariable(self.wb.qualified_addr(*a));
                return Err(CompileError::at(kind, self.wb.qualified_addr(*a)));
            };
            vars.push(CspVar { name: self.name(*a), cell: Some(*a), domain });
        }

        Ok(Compiled {
            csp: Csp { vars, constraints: self.constraints, objective: self.objective },
            goals: self.goals,
            origins: self.origins,
        })
    }

    fn post(&mut self, c: CspConstraint) {
        self.constraints.push(c);
        self.origins.push(self.at);
    }

    fn resolve(&self, a: CellAddr) -> Result<Term, CompileError> {
        if let Some(v) = self.vars.get(&a) {
            return Ok(Term::Var(*v));
        }
        let qualified = self.wb.qualified_addr(a);
        let text = self.wb.get(a).map(|t| clean_cell_text(t).trim()).unwrap_or("");
        if text.is_empty() {
            return Err(self.err(CompileErrorKind::UnknownCell(qualified)));
        }
        text.parse::<i64>()
            .map(Term::Const)
            .map_err(|_| self.err(CompileErrorKind::NonIntegerConstantCell(qualified)))
    }

    fn resolve_all(&self, cells: &[CellAddr]) -> Result<Vec<Term>, CompileError> {
        cells.iter().map(|a| self.resolve(*a)).collect()
    }

    fn term_name(&self, t: Term) -> String {
        match t {
            Term::Var(v) => self.name(self.cells[v.0]),
            Term::Const(c) => c.to_string(),
        }
    }

    fn names(&self, ts: &[Term]) -> Vec<String> {
        ts.iter().map(|t| self.term_name(*t)).collect()
    }

    fn result_list(&self, rl: &ResultListSpec, n: usize) -> Result<Vec<Term>, CompileError> {
        let items = match rl {
            ResultListSpec::LiteralList(vs) => vs.iter().map(|v| Term::Const(*v)).collect(),
            ResultListSpec::Scalar(v) => vec![Term::Const(*v)],
            ResultListSpec::RangeRef(r) => self.resolve_all(&rangekit::flatten(r))?,
            ResultListSpec::CellRef(a) => vec![self.resolve(*a)?],
        };
        Ok(rangekit::set_len(&items, n).expect("result lists and group lists are nonempty"))
    }

    fn expr(&self, e: &ArithExpr) -> Result<Expr, CompileError> {
        let b = |x: &ArithExpr| self.expr(x).map(Box::new);
        Ok(match e {
            ArithExpr::CellRef(a) => Expr::Term(self.resolve(*a)?),
            ArithExpr::IntLit(v) => Expr::int(*v),
            ArithExpr::BinOp(op, x, y) => Expr::Bin(*op, b(x)?, b(y)?),
            ArithExpr::Mod(x, y) => Expr::Mod(b(x)?, b(y)?),
            ArithExpr::Abs(x) => Expr::Abs(b(x)?),
            ArithExpr::Min2(x, y) => Expr::Min(b(x)?, b(y)?),
            ArithExpr::Max2(x, y) => Expr::Max(b(x)?, b(y)?),
        })
    }

    fn render(&self, e: &Expr) -> String {
        let csp = Csp {
            vars: self
                .cells
                .iter()
                .map(|a| CspVar { name: self.name(*a), cell: Some(*a), domain: Domain::empty() })
                .collect(),
            ..Csp::default()
        };
        csp.render_expr(e)
    }

    fn aggregate(
        &mut self,
        op: BinArithOp,
        groups: AddrGroups,
        rel: RelOp,
        rl: &ResultListSpec,
    ) -> Result<(), CompileError> {
        let rhs = self.result_list(rl, groups.len())?;
        let mut group_terms = Vec::with_capacity(groups.len());
        for g in &groups {
            group_terms.push(self.resolve_all(g)?);
        }
        for (operands, r) in group_terms.iter().zip(&rhs) {
            self.post(CspConstraint::FoldRel { op, operands: operands.clone(), rel, rhs: *r });
        }
        let goal = Goal::SubListAggregate {
            op,
            groups: group_terms.iter().map(|g| self.names(g)).collect(),
            rel,
            rhs: self.names(&rhs),
        };
        self.goals.push(goal);
        Ok(())
    }

    fn all_diff_groups(&mut self, groups: AddrGroups) -> Result<(), CompileError> {
        let mut names = Vec::with_capacity(groups.len());
        for g in &groups {
            let terms = self.resolve_all(g)?;
            names.push(self.names(&terms));
            self.post(CspConstraint::AllDiff(terms));
        }
        self.goals.push(Goal::SubListAllDifferent(names));
        Ok(())
    }

    fn objective_var(&self, r: &RangeSpec) -> Result<VarId, CompileError> {
        match r {
            RangeSpec::Single(a) => self.vars.get(a).copied().ok_or_else(|| self.err(CompileErrorKind::ObjectiveNotSingleCell)),
            _ => Err(self.err(CompileErrorKind::ObjectiveNotSingleCell)),
        }
    }

    fn lower(&mut self, ast: &ConstraintAst) -> Result<(), CompileError> {
        use ConstraintAst as C;
        let rect = |r: &RangeSpec, f: fn(&RangeSpec) -> Result<AddrGroups, rangekit::RangeError>| {
            f(r).expect("matrix-only arguments are checked by the parser")
        };
        match ast {
            C::Domain(r, lo, hi) => {
                let cells = rangekit::flatten(r);
                let mut names = Vec::with_capacity(cells.len());
                for a in &cells {
                    let Some(v) = self.vars.get(a).copied() else {
                        return Err(self.err(CompileErrorKind::NotAVariable(self.wb.qualified_addr(*a))));
                    };
                    let bound = Domain::range(*lo, *hi);
                    let slot = &mut self.domains[v.0];
                    *slot = Some(match slot.take() {
                        Some(d) => d.intersect(&bound),
                        None => bound,
                    });
                    names.push(self.name(*a));
                }
                self.goals.push(Goal::DomainIn { vars: names, list: true, domain: format!("{lo}..{hi}") });
            }
            C::AllDifferent(r) => {
                let terms = self.resolve_all(&rangekit::flatten(r))?;
                self.goals.push(Goal::AllDifferent(self.names(&terms)));
                self.post(CspConstraint::AllDiff(terms));
            }
            C::RowsAllDifferent(r) => self.all_diff_groups(rect(r, rangekit::rows))?,
            C::ColsAllDifferent(r) => self.all_diff_groups(rect(r, rangekit::cols))?,
            C::ColsAggregate(op, r, rel, rl) => self.aggregate(*op, rect(r, rangekit::cols), *rel, rl)?,
            C::RowsAggregate(op, r, rel, rl) => self.aggregate(*op, rect(r, rangekit::rows), *rel, rl)?,
            C::DiagonalAggregate(op, r, rel, rl) => self.aggregate(*op, rect(r, rangekit::diagonals), *rel, rl)?,
            C::BackDiagonalAggregate(op, r, rel, rl) => {
                self.aggregate(*op, rect(r, rangekit::back_diagonals), *rel, rl)?
            }
            C::PairCellsAggregate(r1, op, r2, rel, rl) => {
                let l1 = self.resolve_all(&rangekit::flatten(r1))?;
                let l2 = self.resolve_all(&rangekit::flatten(r2))?;
                if l1.len() != l2.len() {
                    return Err(self.err(CompileErrorKind::PairLengthMismatch { left: l1.len(), right: l2.len() }));
                }
                let rhs = self.result_list(rl, l1.len())?;
                for ((a, b), r) in l1.iter().zip(&l2).zip(&rhs) {
                    self.post(CspConstraint::FoldRel { op: *op, operands: vec![*a, *b], rel: *rel, rhs: *r });
                }
                let goal = Goal::PairsAggregate {
                    left: self.names(&l1),
                    op: *op,
                    right: self.names(&l2),
                    rel: *rel,
                    rhs: self.names(&rhs),
                };
                self.goals.push(goal);
            }
            C::NthElement(index, table, value) => {
                let index = match index {
                    ArithExpr::IntLit(v) => Term::Const(*v),
                    ArithExpr::CellRef(a) => self.resolve(*a)?,
                    other => match self.expr(other)? {
                        Expr::Term(t) => t,
                        _ => unreachable!("parser only yields a cell or integer index"),
                    },
                };
                let table = self.resolve_all(&rangekit::flatten(table))?;
                let value = self.resolve(*value)?;
                self.goals.push(Goal::NthElement {
                    index: self.term_name(index),
                    table: self.names(&table),
                    value: self.term_name(value),
                });
                self.post(CspConstraint::Element { index, table, value });
            }
            C::Minimize(r) | C::Maximize(r) => {
                let v = self.objective_var(r)?;
                if self.objective.is_some() {
                    return Err(self.err(CompileErrorKind::MultipleObjectives));
                }
                self.objective = Some(if matches!(ast, C::Minimize(_)) { Objective::Minimize(v) } else { Objective::Maximize(v) });
            }
            C::ArithRel(l, rel, r) => {
                let lhs = self.expr(l)?;
                let rhs = self.expr(r)?;
                self.goals.push(Goal::Arith(format!("{} {rel} {}", self.render(&lhs), self.render(&rhs))));
                self.post(CspConstraint::ArithRel { lhs, rel: *rel, rhs });
            }
        }
        Ok(())
    }
}
