//! The solver-facing constraint model.

use std::fmt;

use crate::fdsolver::Domain;
use crate::grid::CellAddr;
use crate::sslang::{BinArithOp, RelOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Var(VarId),
    Const(i64),
}

/// Arithmetic over terms; mirrors the surface expression language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Term(Term),
    Bin(BinArithOp, Box<Expr>, Box<Expr>),
    Mod(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(v: VarId) -> Expr {
        Expr::Term(Term::Var(v))
    }

    pub fn int(c: i64) -> Expr {
        Expr::Term(Term::Const(c))
    }

    pub fn bin(op: BinArithOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Left fold of `op` over `operands`, which must be nonempty.
    pub fn fold(op: BinArithOp, operands: &[Term]) -> Expr {
        let mut it = operands.iter();
        let first = Expr::Term(*it.next().expect("fold over an empty operand list"));
        it.fold(first, |acc, t| Expr::bin(op, acc, Expr::Term(*t)))
    }

    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            Expr::Term(Term::Var(v)) => out.push(*v),
            Expr::Term(Term::Const(_)) => {}
            Expr::Abs(a) => a.vars(out),
            Expr::Bin(_, a, b) | Expr::Mod(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CspConstraint {
    /// Pairwise distinct. Constants are allowed as members.
    AllDiff(Vec<Term>),
    /// `fold(op, operands) rel rhs`, folded left to right.
    FoldRel { op: BinArithOp, operands: Vec<Term>, rel: RelOp, rhs: Term },
    /// `value = table[index]`, 1-based; `index` is confined to `1..=table.len()`.
    Element { index: Term, table: Vec<Term>, value: Term },
    ArithRel { lhs: Expr, rel: RelOp, rhs: Expr },
}

impl CspConstraint {
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        let mut push = |t: &Term| {
            if let Term::Var(v) = t {
                out.push(*v)
            }
        };
        match self {
            CspConstraint::AllDiff(ts) => ts.iter().for_each(&mut push),
            CspConstraint::FoldRel { operands, rhs, .. } => {
                operands.iter().for_each(&mut push);
                push(rhs);
            }
            CspConstraint::Element { index, table, value } => {
                push(index);
                table.iter().for_each(&mut push);
                push(value);
            }
            CspConstraint::ArithRel { lhs, rhs, .. } => {
                lhs.vars(&mut out);
                rhs.vars(&mut out);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize(VarId),
    Maximize(VarId),
}

impl Objective {
    pub fn var(self) -> VarId {
        match self {
            Objective::Minimize(v) | Objective::Maximize(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspVar {
    pub name: String,
    /// Grid cell the variable came from; `None` for programmatic models.
    pub cell: Option<CellAddr>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csp {
    pub vars: Vec<CspVar>,
    pub constraints: Vec<CspConstraint>,
    pub objective: Option<Objective>,
}

impl Csp {
    pub fn new() -> Self {
        Csp::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, domain: Domain) -> VarId {
        self.vars.push(CspVar { name: name.into(), cell: None, domain });
        VarId(self.vars.len() - 1)
    }

    pub fn post(&mut self, c: CspConstraint) {
        self.constraints.push(c);
    }

    pub fn var(&self, v: VarId) -> &CspVar {
        &self.vars[v.0]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn display<'a>(&'a self, c: &'a CspConstraint) -> DisplayConstraint<'a> {
        DisplayConstraint { csp: self, c }
    }

    fn term(&self, t: Term) -> String {
        match t {
            Term::Var(v) => self.vars[v.0].name.clone(),
            Term::Const(c) => c.to_string(),
        }
    }

    pub(crate) fn render_expr(&self, e: &Expr) -> String {
        fn prec(e: &Expr) -> u8 {
            match e {
                Expr::Bin(BinArithOp::Plus | BinArithOp::Minus, ..) => 1,
                Expr::Bin(BinArithOp::Times, ..) | Expr::Mod(..) => 2,
                _ => 3,
            }
        }
        let child = |c: &Expr, min: u8| {
            let s = self.render_expr(c);
            if prec(c) < min { format!("({s})") } else { s }
        };
        match e {
            Expr::Term(t) => self.term(*t),
            Expr::Bin(op, a, b) => format!("{} {} {}", child(a, prec(e)), op.symbol(), child(b, prec(e) + 1)),
            Expr::Mod(a, b) => format!("{} mod {}", child(a, 2), child(b, 3)),
            Expr::Abs(a) => format!("abs({})", self.render_expr(a)),
            Expr::Min(a, b) => format!("min({}, {})", self.render_expr(a), self.render_expr(b)),
            Expr::Max(a, b) => format!("max({}, {})", self.render_expr(a), self.render_expr(b)),
        }
    }

    pub(crate) fn render_terms(&self, ts: &[Term]) -> String {
        let parts: Vec<String> = ts.iter().map(|t| self.term(*t)).collect();
        format!("[{}]", parts.join(","))
    }
}

/// Renders a constraint as a single relation, e.g. `A1 + C5 #> 1`.
pub struct DisplayConstraint<'a> {
    csp: &'a Csp,
    c: &'a CspConstraint,
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let csp = self.csp;
        match self.c {
            CspConstraint::AllDiff(ts) => write!(f, "all_different({})", csp.render_terms(ts)),
            CspConstraint::FoldRel { op, operands, rel, rhs } => {
                write!(f, "{} {rel} {}", csp.render_expr(&Expr::fold(*op, operands)), csp.term(*rhs))
            }
            CspConstraint::Element { index, table, value } => {
                write!(f, "nthElement({}, {}, {})", csp.term(*index), csp.render_terms(table), csp.term(*value))
            }
            CspConstraint::ArithRel { lhs, rel, rhs } => {
                write!(f, "{} {rel} {}", csp.render_expr(lhs), csp.render_expr(rhs))
            }
        }
    }
}
