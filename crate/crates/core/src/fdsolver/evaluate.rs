//! Direct checking of complete assignments, with no propagation involved.

use crate::compiler::{Csp, CspConstraint, Expr, Term, VarId};
use crate::sslang::BinArithOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    /// Index into `csp.constraints`.
    Violated(usize),
    OutOfDomain(VarId),
}

/// Floored modulus: the result takes the sign of `b`. `None` when `b == 0`.
pub fn floor_mod(a: i64, b: i64) -> Option<i64> {
    if b == 0 {
        return None;
    }
    if b == -1 {
        return Some(0);
    }
    let r = a % b;
    Some(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r })
}

fn term(t: Term, values: &[i64]) -> i64 {
    match t {
        Term::Var(v) => values[v.0],
        Term::Const(c) => c,
    }
}

/// `None` when the expression is undefined (overflow, modulus by zero).
pub fn eval_expr(e: &Expr, values: &[i64]) -> Option<i64> {
    match e {
        Expr::Term(t) => Some(term(*t, values)),
        Expr::Bin(op, a, b) => op.apply(eval_expr(a, values)?, eval_expr(b, values)?),
        Expr::Mod(a, b) => floor_mod(eval_expr(a, values)?, eval_expr(b, values)?),
        Expr::Abs(a) => eval_expr(a, values)?.checked_abs(),
        Expr::Min(a, b) => Some(eval_expr(a, values)?.min(eval_expr(b, values)?)),
        Expr::Max(a, b) => Some(eval_expr(a, values)?.max(eval_expr(b, values)?)),
    }
}

fn fold(op: BinArithOp, operands: &[Term], values: &[i64]) -> Option<i64> {
    let mut it = operands.iter();
    let first = term(*it.next()?, values);
    it.try_fold(first, |acc, t| op.apply(acc, term(*t, values)))
}

pub fn holds(c: &CspConstraint, values: &[i64]) -> bool {
    match c {
        CspConstraint::AllDiff(ts) => {
            let vs: Vec<i64> = ts.iter().map(|t| term(*t, values)).collect();
            vs.iter().enumerate().all(|(i, a)| vs[i + 1..].iter().all(|b| a != b))
        }
        CspConstraint::FoldRel { op, operands, rel, rhs } => {
            fold(*op, operands, values).is_some_and(|l| rel.holds(l, term(*rhs, values)))
        }
        CspConstraint::Element { index, table, value } => {
            let i = term(*index, values);
            i >= 1 && (i as u64) <= table.len() as u64 && term(table[(i - 1) as usize], values) == term(*value, values)
        }
        CspConstraint::ArithRel { lhs, rel, rhs } => match (eval_expr(lhs, values), eval_expr(rhs, values)) {
            (Some(l), Some(r)) => rel.holds(l, r),
            _ => false,
        },
    }
}

/// Checks domains first, then constraints in order.
pub fn evaluate(csp: &Csp, values: &[i64]) -> Verdict {
    assert_eq!(values.len(), csp.vars.len(), "assignment must be total");
    for (i, v) in csp.vars.iter().enumerate() {
        if !v.domain.contains(values[i]) {
            return Verdict::OutOfDomain(VarId(i));
        }
    }
    match csp.constraints.iter().position(|c| !holds(c, values)) {
        Some(i) => Verdict::Violated(i),
        None => Verdict::Satisfied,
    }
}
