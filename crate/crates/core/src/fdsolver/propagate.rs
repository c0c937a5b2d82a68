//! Constraint filtering to a fixpoint.
//!
//! Arithmetic relations use bounds reasoning over an expression tree: a
//! forward pass computes an interval for every node, a backward pass pushes
//! the admissible interval of the root down to the variable leaves. Fold
//! relations are rewritten into the same tree form.

use std::collections::VecDeque;

use super::evaluate::holds;
use super::store::{Inconsistent, VarStore};
use super::Domain;
use crate::compiler::{Csp, CspConstraint, Expr, Term, VarId};
use crate::sslang::{BinArithOp, RelOp};

/// Interval endpoints saturate here; anything beyond is treated as unbounded.
const INF: i128 = 1 << 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Itv {
    lo: i128,
    hi: i128,
}

fn sat(x: i128) -> i128 {
    x.clamp(-INF, INF)
}

impl Itv {
    fn new(lo: i128, hi: i128) -> Self {
        Itv { lo: sat(lo), hi: sat(hi) }
    }

    fn point(v: i128) -> Self {
        Itv::new(v, v)
    }

    fn all() -> Self {
        Itv { lo: -INF, hi: INF }
    }

    fn meet(self, o: Itv) -> Option<Itv> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo <= hi).then_some(Itv { lo, hi })
    }

    fn contains(self, v: i128) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn fixed(self) -> Option<i128> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

fn mul_hull(a: Itv, b: Itv) -> Itv {
    let ps = [
        a.lo.saturating_mul(b.lo),
        a.lo.saturating_mul(b.hi),
        a.hi.saturating_mul(b.lo),
        a.hi.saturating_mul(b.hi),
    ];
    Itv::new(*ps.iter().min().unwrap(), *ps.iter().max().unwrap())
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) { q - 1 } else { q }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) { q + 1 } else { q }
}

/// Integer hull of `{ x : x * d ∈ t, d ∈ div }` for a divisor interval
/// that excludes zero.
fn div_hull(t: Itv, div: Itv) -> Itv {
    debug_assert!(!div.contains(0));
    let pairs = [(t.lo, div.lo), (t.lo, div.hi), (t.hi, div.lo), (t.hi, div.hi)];
    let lo = pairs.iter().map(|&(n, d)| div_ceil(n, d)).min().unwrap();
    let hi = pairs.iter().map(|&(n, d)| div_floor(n, d)).max().unwrap();
    Itv::new(lo, hi)
}

#[derive(Debug, Clone)]
enum Prop {
    AllDiff(Vec<Term>),
    Rel(Expr, RelOp, Expr),
    /// `sum(c_i * t_i) rel 0` with unit coefficients, from `+` and `-` folds.
    Linear(Vec<(i128, Term)>, RelOp),
    Element { index: Term, table: Vec<Term>, value: Term },
}

/// Compiled filters for one [`Csp`], with a watch list per variable.
#[derive(Debug, Clone)]
pub struct Propagator {
    props: Vec<Prop>,
    /// Variables of each prop, deduplicated.
    scopes: Vec<Vec<VarId>>,
    watch: Vec<Vec<usize>>,
    /// Original constraints, for the all-fixed check.
    originals: Vec<CspConstraint>,
}

struct Ctx<'s> {
    store: &'s mut VarStore,
    changed: &'s mut Vec<VarId>,
}

impl Ctx<'_> {
    fn dom_of(&self, t: Term) -> Domain {
        match t {
            Term::Var(v) => self.store.dom(v).clone(),
            Term::Const(c) => Domain::singleton(c),
        }
    }

    fn restrict(&mut self, t: Term, d: &Domain) -> Result<(), Inconsistent> {
        match t {
            Term::Var(v) => {
                if self.store.restrict(v, d)? {
                    self.changed.push(v);
                }
                Ok(())
            }
            Term::Const(c) => {
                if d.contains(c) {
                    Ok(())
                } else {
                    Err(Inconsistent)
                }
            }
        }
    }

    fn restrict_itv(&mut self, t: Term, itv: Itv) -> Result<(), Inconsistent> {
        let lo = itv.lo.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
        let hi = itv.hi.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
        if itv.lo > i64::MAX as i128 || itv.hi < i64::MIN as i128 {
            return Err(Inconsistent);
        }
        self.restrict(t, &Domain::range(lo, hi))
    }

    fn term_itv(&self, t: Term) -> Itv {
        match t {
            Term::Var(v) => {
                let d = self.store.dom(v);
                Itv::new(d.min().expect("nonempty") as i128, d.max().expect("nonempty") as i128)
            }
            Term::Const(c) => Itv::point(c as i128),
        }
    }

    /// Interval enclosing every value `e` can take; `None` if it can take none.
    fn fwd(&self, e: &Expr) -> Option<Itv> {
        Some(match e {
            Expr::Term(t) => self.term_itv(*t),
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.fwd(a)?, self.fwd(b)?);
                match op {
                    BinArithOp::Plus => Itv::new(a.lo + b.lo, a.hi + b.hi),
                    BinArithOp::Minus => Itv::new(a.lo - b.hi, a.hi - b.lo),
                    BinArithOp::Times => mul_hull(a, b),
                }
            }
            Expr::Mod(a, b) => {
                let (a, b) = (self.fwd(a)?, self.fwd(b)?);
                if let (Some(x), Some(y)) = (a.fixed(), b.fixed()) {
                    if y == 0 {
                        return None;
                    }
                    let r = x.rem_euclid(y.abs());
                    let r = if y < 0 && r != 0 { r + y } else { r };
                    return Some(Itv::point(r));
                }
                if b.lo > 0 {
                    let hi = b.hi - 1;
                    if a.lo >= 0 { Itv::new(0, hi.min(a.hi)) } else { Itv::new(0, hi) }
                } else if b.hi < 0 {
                    let lo = b.lo + 1;
                    if a.hi <= 0 { Itv::new(lo.max(a.lo), 0) } else { Itv::new(lo, 0) }
                } else if b.lo == 0 && b.hi == 0 {
                    return None;
                } else {
                    Itv::new((b.lo + 1).min(0), (b.hi - 1).max(0))
                }
            }
            Expr::Abs(a) => {
                let a = self.fwd(a)?;
                if a.lo >= 0 {
                    a
                } else if a.hi <= 0 {
                    Itv::new(-a.hi, -a.lo)
                } else {
                    Itv::new(0, a.hi.max(-a.lo))
                }
            }
            Expr::Min(a, b) => {
                let (a, b) = (self.fwd(a)?, self.fwd(b)?);
                Itv::new(a.lo.min(b.lo), a.hi.min(b.hi))
            }
            Expr::Max(a, b) => {
                let (a, b) = (self.fwd(a)?, self.fwd(b)?);
                Itv::new(a.lo.max(b.lo), a.hi.max(b.hi))
            }
        })
    }

    /// Narrows the leaves of `e` so that its value can lie in `t`.
    fn narrow(&mut self, e: &Expr, t: Itv) -> Result<(), Inconsistent> {
        let cur = self.fwd(e).ok_or(Inconsistent)?;
        let t = cur.meet(t).ok_or(Inconsistent)?;
        match e {
            Expr::Term(term) => {
                if t != cur {
                    self.restrict_itv(*term, t)?;
                }
            }
            Expr::Bin(op, a, b) => match op {
                BinArithOp::Plus => {
                    let bi = self.fwd(b).ok_or(Inconsistent)?;
                    self.narrow(a, Itv::new(t.lo - bi.hi, t.hi - bi.lo))?;
                    let ai = self.fwd(a).ok_or(Inconsistent)?;
                    self.narrow(b, Itv::new(t.lo - ai.hi, t.hi - ai.lo))?;
                }
                BinArithOp::Minus => {
                    let bi = self.fwd(b).ok_or(Inconsistent)?;
                    self.narrow(a, Itv::new(t.lo + bi.lo, t.hi + bi.hi))?;
                    let ai = self.fwd(a).ok_or(Inconsistent)?;
                    self.narrow(b, Itv::new(ai.lo - t.hi, ai.hi - t.lo))?;
                }
                BinArithOp::Times => {
                    let bi = self.fwd(b).ok_or(Inconsistent)?;
                    if !bi.contains(0) {
                        self.narrow(a, div_hull(t, bi))?;
                    }
                    let ai = self.fwd(a).ok_or(Inconsistent)?;
                    if !ai.contains(0) {
                        self.narrow(b, div_hull(t, ai))?;
                    }
                }
            },
            Expr::Mod(a, b) => {
                if let Expr::Term(Term::Var(v)) = **b {
                    if self.store.dom(v).contains(0) {
                        let d = self.store.dom(v).remove(0);
                        self.restrict(Term::Var(v), &d)?;
                    }
                }
                self.narrow(a, Itv::all())?;
                self.narrow(b, Itv::all())?;
            }
            Expr::Abs(a) => {
                let t = t.meet(Itv::new(0, INF)).ok_or(Inconsistent)?;
                self.narrow(a, Itv::new(-t.hi, t.hi))?;
                let ai = self.fwd(a).ok_or(Inconsistent)?;
                if ai.lo >= 0 {
                    self.narrow(a, t)?;
                } else if ai.hi <= 0 {
                    self.narrow(a, Itv::new(-t.hi, -t.lo))?;
                }
            }
            Expr::Min(a, b) => {
                self.narrow(a, Itv::new(t.lo, INF))?;
                self.narrow(b, Itv::new(t.lo, INF))?;
                let (ai, bi) = (self.fwd(a).ok_or(Inconsistent)?, self.fwd(b).ok_or(Inconsistent)?);
                if bi.lo > t.hi {
                    self.narrow(a, t)?;
                }
                if ai.lo > t.hi {
                    self.narrow(b, t)?;
                }
            }
            Expr::Max(a, b) => {
                self.narrow(a, Itv::new(-INF, t.hi))?;
                self.narrow(b, Itv::new(-INF, t.hi))?;
                let (ai, bi) = (self.fwd(a).ok_or(Inconsistent)?, self.fwd(b).ok_or(Inconsistent)?);
                if bi.hi < t.lo {
                    self.narrow(a, t)?;
                }
                if ai.hi < t.lo {
                    self.narrow(b, t)?;
                }
            }
        }
        Ok(())
    }

    fn rel(&mut self, lhs: &Expr, rel: RelOp, rhs: &Expr) -> Result<(), Inconsistent> {
        let r = self.fwd(rhs).ok_or(Inconsistent)?;
        match rel {
            RelOp::Eq => {
                self.narrow(lhs, r)?;
                let l = self.fwd(lhs).ok_or(Inconsistent)?;
                self.narrow(rhs, l)?;
            }
            RelOp::Le | RelOp::Lt => {
                let gap = if rel == RelOp::Lt { 1 } else { 0 };
                self.narrow(lhs, Itv::new(-INF, r.hi - gap))?;
                let l = self.fwd(lhs).ok_or(Inconsistent)?;
                self.narrow(rhs, Itv::new(l.lo + gap, INF))?;
            }
            RelOp::Ge | RelOp::Gt => {
                let gap = if rel == RelOp::Gt { 1 } else { 0 };
                self.narrow(lhs, Itv::new(r.lo + gap, INF))?;
                let l = self.fwd(lhs).ok_or(Inconsistent)?;
                self.narrow(rhs, Itv::new(-INF, l.hi - gap))?;
            }
            RelOp::Neq => {
                let l = self.fwd(lhs).ok_or(Inconsistent)?;
                match (l.fixed(), r.fixed()) {
                    (Some(x), Some(y)) if x == y => return Err(Inconsistent),
                    (Some(x), None) => self.exclude(rhs, x)?,
                    (None, Some(y)) => self.exclude(lhs, y)?,
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn linear(&mut self, items: &[(i128, Term)], rel: RelOp) -> Result<(), Inconsistent> {
        // contribution interval of each item, c in {1, -1}
        let span = |ctx: &Self, (c, t): (i128, Term)| {
            let i = ctx.term_itv(t);
            if c > 0 { (i.lo, i.hi) } else { (-i.hi, -i.lo) }
        };
        let (mut lo, mut hi) = (0i128, 0i128);
        for it in items {
            let (a, b) = span(self, *it);
            lo += a;
            hi += b;
        }
        let (upper, lower) = match rel {
            RelOp::Eq => (Some(0), Some(0)),
            RelOp::Le => (Some(0), None),
            RelOp::Lt => (Some(-1), None),
            RelOp::Ge => (None, Some(0)),
            RelOp::Gt => (None, Some(1)),
            RelOp::Neq => {
                let open: Vec<&(i128, Term)> = items.iter().filter(|it| self.term_itv(it.1).fixed().is_none()).collect();
                match open.as_slice() {
                    [] if lo == 0 => return Err(Inconsistent),
                    [(c, t)] => {
                        let (a, _) = span(self, (*c, *t));
                        // the remaining items sum to lo - a; the open one must avoid making the total 0
                        let forbidden = -(lo - a) * c;
                        self.exclude(&Expr::Term(*t), forbidden)?;
                    }
                    _ => {}
                }
                return Ok(());
            }
        };
        if upper.is_some_and(|u| lo > u) || lower.is_some_and(|l| hi < l) {
            return Err(Inconsistent);
        }
        for &(c, t) in items {
            let (a, b) = span(self, (c, t));
            // bounds on this item's contribution
            let cmax = upper.map_or(INF, |u| u - (lo - a));
            let cmin = lower.map_or(-INF, |l| l - (hi - b));
            if cmax >= b && cmin <= a {
                continue;
            }
            let itv = if c > 0 { Itv::new(cmin, cmax) } else { Itv::new(-cmax, -cmin) };
            self.restrict_itv(t, itv)?;
        }
        Ok(())
    }

    fn exclude(&mut self, e: &Expr, value: i128) -> Result<(), Inconsistent> {
        if let Expr::Term(Term::Var(v)) = e {
            if let Ok(value) = i64::try_from(value) {
                let d = self.store.dom(*v).remove(value);
                self.restrict(Term::Var(*v), &d)?;
            }
        }
        Ok(())
    }

    fn all_diff(&mut self, terms: &[Term]) -> Result<(), Inconsistent> {
        let mut done = vec![false; terms.len()];
        loop {
            let mut progress = false;
            for i in 0..terms.len() {
                if done[i] {
                    continue;
                }
                let Some(v) = self.dom_of(terms[i]).value() else { continue };
                done[i] = true;
                progress = true;
                for (j, t) in terms.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = self.dom_of(*t);
                    if d.contains(v) {
                        self.restrict(*t, &d.remove(v))?;
                    }
                }
            }
            if !progress {
                return Ok(());
            }
        }
    }

    fn element(&mut self, index: Term, table: &[Term], value: Term) -> Result<(), Inconsistent> {
        let n = table.len() as i64;
        self.restrict(index, &Domain::range(1, n))?;
        let vdom = self.dom_of(value);
        let idom = self.dom_of(index);
        let feasible: Vec<i64> =
            idom.iter().filter(|&i| !self.dom_of(table[(i - 1) as usize]).intersect(&vdom).is_empty()).collect();
        if feasible.is_empty() {
            return Err(Inconsistent);
        }
        self.restrict(index, &Domain::from_values(feasible.iter().copied()))?;
        let support = feasible
            .iter()
            .fold(Domain::empty(), |acc, &i| acc.union(&self.dom_of(table[(i - 1) as usize])));
        self.restrict(value, &support)?;
        if let [i] = feasible.as_slice() {
            let entry = table[(*i - 1) as usize];
            let vdom = self.dom_of(value);
            self.restrict(entry, &vdom)?;
            let edom = self.dom_of(entry);
            self.restrict(value, &edom)?;
        }
        Ok(())
    }
}

impl Propagator {
    pub fn new(csp: &Csp) -> Self {
        let mut props = Vec::with_capacity(csp.constraints.len());
        let mut scopes = Vec::with_capacity(csp.constraints.len());
        let mut watch = vec![Vec::new(); csp.vars.len()];
        for (ci, c) in csp.constraints.iter().enumerate() {
            let p = match c {
                CspConstraint::AllDiff(ts) => Prop::AllDiff(ts.clone()),
                CspConstraint::FoldRel { op: op @ (BinArithOp::Plus | BinArithOp::Minus), operands, rel, rhs } => {
                    let tail = if *op == BinArithOp::Plus { 1 } else { -1 };
                    let mut items: Vec<(i128, Term)> =
                        operands.iter().enumerate().map(|(i, t)| (if i == 0 { 1 } else { tail }, *t)).collect();
                    items.push((-1, *rhs));
                    Prop::Linear(items, *rel)
                }
                CspConstraint::FoldRel { op, operands, rel, rhs } => {
                    Prop::Rel(Expr::fold(*op, operands), *rel, Expr::Term(*rhs))
                }
                CspConstraint::Element { index, table, value } => {
                    Prop::Element { index: *index, table: table.clone(), value: *value }
                }
                CspConstraint::ArithRel { lhs, rel, rhs } => Prop::Rel(lhs.clone(), *rel, rhs.clone()),
            };
            let scope = c.vars();
            for v in &scope {
                watch[v.0].push(ci);
            }
            props.push(p);
            scopes.push(scope);
        }
        Propagator { props, scopes, watch, originals: csp.constraints.clone() }
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    /// Runs every constraint to a common fixpoint.
    pub fn propagate_all(&self, store: &mut VarStore) -> Result<(), Inconsistent> {
        self.run(store, (0..self.props.len()).collect())
    }

    /// Runs the constraints watching any of `changed`, then everything they wake.
    pub fn propagate_from(&self, store: &mut VarStore, changed: &[VarId]) -> Result<(), Inconsistent> {
        let mut seed = Vec::new();
        for v in changed {
            seed.extend_from_slice(&self.watch[v.0]);
        }
        self.run(store, seed)
    }

    fn run(&self, store: &mut VarStore, seed: Vec<usize>) -> Result<(), Inconsistent> {
        let mut queued = vec![false; self.props.len()];
        let mut queue = VecDeque::with_capacity(seed.len());
        for ci in seed {
            if !queued[ci] {
                queued[ci] = true;
                queue.push_back(ci);
            }
        }
        let mut changed = Vec::new();
        while let Some(ci) = queue.pop_front() {
            queued[ci] = false;
            changed.clear();
            let mut ctx = Ctx { store, changed: &mut changed };
            match &self.props[ci] {
                Prop::AllDiff(ts) => ctx.all_diff(ts)?,
                Prop::Rel(l, rel, r) => ctx.rel(l, *rel, r)?,
                Prop::Linear(items, rel) => ctx.linear(items, *rel)?,
                Prop::Element { index, table, value } => ctx.element(*index, table, *value)?,
            }
            if self.scopes[ci].iter().all(|v| store.value(*v).is_some()) {
                let values: Vec<i64> = store.domains().iter().map(|d| d.min().unwrap_or(0)).collect();
                if !holds(&self.originals[ci], &values) {
                    return Err(Inconsistent);
                }
            }
            for v in &changed {
                for &cj in &self.watch[v.0] {
                    if !queued[cj] {
                        queued[cj] = true;
                        queue.push_back(cj);
                    }
                }
            }
        }
        Ok(())
    }
}
