//! Shared test support: fixture loading, an independent brute-force oracle,
//! random model generation, transformation goldens and a session replay model.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use sheetfd::compiler::{compile, Csp, CspConstraint, Expr, Objective, Term, VarId};
use sheetfd::fdsolver::Domain;
use sheetfd::grid::{CellAddr, Workbook};
use sheetfd::rangekit;
use sheetfd::session::{Session, View};
use sheetfd::sslang::{parse_range_spec, BinArithOp, RelOp};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Workbook {
    Workbook::load(&fixture_path(name)).unwrap()
}

// ---------------------------------------------------------------------------
// Oracle. Deliberately written against the IR only, sharing no code with the
// solver's evaluator.

fn o_mod(a: i128, b: i128) -> Option<i128> {
    if b == 0 {
        return None;
    }
    let r = a.rem_euclid(b.abs());
    Some(if b < 0 && r != 0 { r + b } else { r })
}

fn o_term(t: &Term, vals: &[i64]) -> i128 {
    match t {
        Term::Var(v) => vals[v.0] as i128,
        Term::Const(c) => *c as i128,
    }
}

fn o_op(op: BinArithOp, a: i128, b: i128) -> i128 {
    match op {
        BinArithOp::Plus => a + b,
        BinArithOp::Minus => a - b,
        BinArithOp::Times => a * b,
    }
}

fn o_expr(e: &Expr, vals: &[i64]) -> Option<i128> {
    Some(match e {
        Expr::Term(t) => o_term(t, vals),
        Expr::Bin(op, a, b) => o_op(*op, o_expr(a, vals)?, o_expr(b, vals)?),
        Expr::Mod(a, b) => o_mod(o_expr(a, vals)?, o_expr(b, vals)?)?,
        Expr::Abs(a) => o_expr(a, vals)?.abs(),
        Expr::Min(a, b) => o_expr(a, vals)?.min(o_expr(b, vals)?),
        Expr::Max(a, b) => o_expr(a, vals)?.max(o_expr(b, vals)?),
    })
}

fn o_rel(rel: RelOp, a: i128, b: i128) -> bool {
    match rel {
        RelOp::Eq => a == b,
        RelOp::Neq => a != b,
        RelOp::Lt => a < b,
        RelOp::Gt => a > b,
        RelOp::Le => a <= b,
        RelOp::Ge => a >= b,
    }
}

pub fn oracle_holds(c: &CspConstraint, vals: &[i64]) -> bool {
    match c {
        CspConstraint::AllDiff(ts) => {
            let xs: Vec<i128> = ts.iter().map(|t| o_term(t, vals)).collect();
            let set: BTreeSet<i128> = xs.iter().copied().collect();
            set.len() == xs.len()
        }
        CspConstraint::FoldRel { op, operands, rel, rhs } => {
            let mut acc = o_term(&operands[0], vals);
            for t in &operands[1..] {
                acc = o_op(*op, acc, o_term(t, vals));
            }
            o_rel(*rel, acc, o_term(rhs, vals))
        }
        CspConstraint::Element { index, table, value } => {
            // selector booleans b_k = (index == k), sum b_k = 1, value = sum b_k * table_k
            let idx = o_term(index, vals);
            let sel: Vec<i128> = (1..=table.len() as i128).map(|k| (idx == k) as i128).collect();
            let picked: i128 = sel.iter().zip(table).map(|(b, t)| b * o_term(t, vals)).sum();
            sel.iter().sum::<i128>() == 1 && picked == o_term(value, vals)
        }
        CspConstraint::ArithRel { lhs, rel, rhs } => match (o_expr(lhs, vals), o_expr(rhs, vals)) {
            (Some(a), Some(b)) => o_rel(*rel, a, b),
            _ => false,
        },
    }
}

pub fn oracle_ok(csp: &Csp, vals: &[i64]) -> bool {
    csp.vars.iter().zip(vals).all(|(v, x)| v.domain.contains(*x)) && csp.constraints.iter().all(|c| oracle_holds(c, vals))
}

/// Every satisfying tuple, in lexicographic order.
pub fn brute_force(csp: &Csp) -> Vec<Vec<i64>> {
    let doms: Vec<Vec<i64>> = csp.vars.iter().map(|v| v.domain.iter().collect()).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; doms.len()];
    fn go(i: usize, doms: &[Vec<i64>], cur: &mut Vec<i64>, csp: &Csp, out: &mut Vec<Vec<i64>>) {
        if i == doms.len() {
            if csp.constraints.iter().all(|c| oracle_holds(c, cur)) {
                out.push(cur.clone());
            }
            return;
        }
        for &x in &doms[i] {
            cur[i] = x;
            go(i + 1, doms, cur, csp, out);
        }
    }
    go(0, &doms, &mut cur, csp, &mut out);
    out
}

/// Brute-force optimum and every tuple attaining it.
pub fn brute_optimum(csp: &Csp) -> Option<(i64, Vec<Vec<i64>>)> {
    let obj = csp.objective?;
    let all = brute_force(csp);
    let v = obj.var().0;
    let best = match obj {
        Objective::Minimize(_) => all.iter().map(|s| s[v]).min()?,
        Objective::Maximize(_) => all.iter().map(|s| s[v]).max()?,
    };
    Some((best, all.into_iter().filter(|s| s[v] == best).collect()))
}

// ---------------------------------------------------------------------------
// Random models: at most five variables, domains inside 0..5.

fn rand_domain(rng: &mut impl Rng) -> Domain {
    if rng.gen_bool(0.5) {
        let lo = rng.gen_range(0..=5);
        let hi = rng.gen_range(lo..=5);
        Domain::range(lo, hi)
    } else {
        let vals: Vec<i64> = (0..=5).filter(|_| rng.gen_bool(0.6)).collect();
        if vals.is_empty() {
            Domain::singleton(rng.gen_range(0..=5))
        } else {
            Domain::from_values(vals)
        }
    }
}

fn rand_term(rng: &mut impl Rng, n: usize) -> Term {
    if rng.gen_bool(0.8) {
        Term::Var(VarId(rng.gen_range(0..n)))
    } else {
        Term::Const(rng.gen_range(-2..=7))
    }
}

fn rand_rel(rng: &mut impl Rng) -> RelOp {
    *RelOp::ALL.choose(rng).unwrap()
}

fn rand_op(rng: &mut impl Rng) -> BinArithOp {
    *BinArithOp::ALL.choose(rng).unwrap()
}

fn rand_expr(rng: &mut impl Rng, n: usize, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.35) {
        return Expr::Term(rand_term(rng, n));
    }
    let a = Box::new(rand_expr(rng, n, depth - 1));
    let b = Box::new(rand_expr(rng, n, depth - 1));
    match rng.gen_range(0..7) {
        0..=2 => Expr::Bin(rand_op(rng), a, b),
        3 => Expr::Mod(a, b),
        4 => Expr::Abs(a),
        5 => Expr::Min(a, b),
        _ => Expr::Max(a, b),
    }
}

fn rand_constraint(rng: &mut impl Rng, n: usize) -> CspConstraint {
    match rng.gen_range(0..4) {
        0 => CspConstraint::AllDiff((0..rng.gen_range(2..=4)).map(|_| rand_term(rng, n)).collect()),
        1 => CspConstraint::FoldRel {
            op: rand_op(rng),
            operands: (0..rng.gen_range(1..=4)).map(|_| rand_term(rng, n)).collect(),
            rel: rand_rel(rng),
            rhs: rand_term(rng, n),
        },
        2 => CspConstraint::Element {
            index: rand_term(rng, n),
            table: (0..rng.gen_range(1..=5)).map(|_| rand_term(rng, n)).collect(),
            value: rand_term(rng, n),
        },
        _ => CspConstraint::ArithRel { lhs: rand_expr(rng, n, 2), rel: rand_rel(rng), rhs: rand_expr(rng, n, 2) },
    }
}

pub fn random_csp(rng: &mut impl Rng) -> Csp {
    let n = rng.gen_range(1..=5);
    let mut csp = Csp::new();
    for i in 0..n {
        csp.add_var(format!("V{i}"), rand_domain(rng));
    }
    for _ in 0..rng.gen_range(1..=4) {
        csp.post(rand_constraint(rng, n));
    }
    csp
}

pub fn with_random_objective(mut csp: Csp, rng: &mut impl Rng) -> Csp {
    let v = VarId(rng.gen_range(0..csp.vars.len()));
    csp.objective = Some(if rng.gen_bool(0.5) { Objective::Minimize(v) } else { Objective::Maximize(v) });
    csp
}

// ---------------------------------------------------------------------------
// Transformation goldens.

pub struct Golden {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
}

impl Golden {
    pub fn ok(&self) -> bool {
        self.expected == self.actual
    }
}

fn fmt_list(xs: &[String]) -> String {
    format!("[{}]", xs.join(","))
}

fn fmt_groups(gs: &[Vec<String>]) -> String {
    let parts: Vec<String> = gs.iter().map(|g| fmt_list(g)).collect();
    format!("[{}]", parts.join(","))
}

fn names(wb: &Workbook, cells: &[CellAddr]) -> Vec<String> {
    cells.iter().map(|a| wb.var_name(*a, wb.active())).collect()
}

fn two_sheets() -> Workbook {
    let mut wb = Workbook::default();
    wb.add_sheet("Sheet2").unwrap();
    wb
}

fn range_golden(
    name: &'static str,
    wb: &Workbook,
    spec: &str,
    f: fn(&sheetfd::RangeSpec) -> Result<rangekit::AddrGroups, rangekit::RangeError>,
    expected: &str,
) -> Golden {
    let r = parse_range_spec(spec, wb, wb.active()).unwrap();
    let gs: Vec<Vec<String>> = f(&r).unwrap().iter().map(|g| names(wb, g)).collect();
    Golden { name, expected: expected.to_string(), actual: fmt_groups(&gs) }
}

fn flat_golden(name: &'static str, wb: &Workbook, spec: &str, expected: &str) -> Golden {
    let r = parse_range_spec(spec, wb, wb.active()).unwrap();
    Golden { name, expected: expected.to_string(), actual: fmt_list(&names(wb, &rangekit::flatten(&r))) }
}

/// Groups compared as a set, for listings whose group order differs from the
/// canonical ResultList pairing order.
fn group_set_golden(
    name: &'static str,
    spec: &str,
    f: fn(&sheetfd::RangeSpec) -> Result<rangekit::AddrGroups, rangekit::RangeError>,
    expected: &[&str],
) -> Golden {
    let wb = Workbook::default();
    let r = parse_range_spec(spec, &wb, 0).unwrap();
    let mut got: Vec<String> = f(&r).unwrap().iter().map(|g| fmt_list(&names(&wb, g))).collect();
    got.sort();
    let mut want: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
    want.sort();
    Golden { name, expected: want.join(" "), actual: got.join(" ") }
}

/// A workbook where `vars` are variable cells over 0..9, `consts` are plain
/// cells, and `constraint` sits alone in the constraint range.
pub fn lowering_workbook(vars: &str, consts: &[(&str, &str)], constraint: &str) -> Workbook {
    let mut wb = Workbook::default();
    let range = parse_range_spec(vars, &wb, 0).unwrap();
    for a in rangekit::flatten(&range) {
        wb.set(a, "0..9");
    }
    for (a, t) in consts {
        wb.set_text(a, t).unwrap();
    }
    wb.set_text("Z1", constraint).unwrap();
    wb.set_text("Z10", &format!("ssVarRanges({vars})")).unwrap();
    wb.set_text("Z11", "ssConstraintRanges(Z1)").unwrap();
    wb
}

/// The constraints produced by `constraint`, one rendered relation each.
pub fn expand(vars: &str, consts: &[(&str, &str)], constraint: &str) -> Vec<String> {
    let c = compile(&lowering_workbook(vars, consts, constraint)).unwrap();
    c.csp.constraints.iter().map(|k| c.csp.display(k).to_string()).collect()
}

/// The emitted program line for `constraint` (its last goal).
pub fn goal_line(vars: &str, consts: &[(&str, &str)], constraint: &str) -> String {
    let c = compile(&lowering_workbook(vars, consts, constraint)).unwrap();
    c.goals.last().unwrap().to_string()
}

fn lowering_golden(name: &'static str, vars: &str, consts: &[(&str, &str)], constraint: &str, expected: &[&str]) -> Golden {
    Golden { name, expected: expected.join("; "), actual: expand(vars, consts, constraint).join("; ") }
}

fn goal_golden(name: &'static str, vars: &str, consts: &[(&str, &str)], constraint: &str, expected: &str) -> Golden {
    Golden { name, expected: expected.to_string(), actual: goal_line(vars, consts, constraint) }
}

/// Pairwise disequalities implied by the all-different constraints of a lowering.
fn pairwise(vars: &str, constraint: &str) -> String {
    let c = compile(&lowering_workbook(vars, &[], constraint)).unwrap();
    let mut pairs = Vec::new();
    for k in &c.csp.constraints {
        if let CspConstraint::AllDiff(ts) = k {
            let ns: Vec<String> = ts
                .iter()
                .map(|t| match t {
                    Term::Var(v) => c.csp.var(*v).name.clone(),
                    Term::Const(x) => x.to_string(),
                })
                .collect();
            for i in 0..ns.len() {
                for j in i + 1..ns.len() {
                    let (a, b) = if ns[i] < ns[j] { (&ns[i], &ns[j]) } else { (&ns[j], &ns[i]) };
                    pairs.push(format!("{a}!={b}"));
                }
            }
        }
    }
    pairs.sort();
    pairs.join(" ")
}

/// Domains of each variable after lowering `constraint`, as `name:domain`.
fn domains_after(vars: &str, constraint: &str) -> String {
    let mut wb = Workbook::default();
    wb.set_text("Z1", constraint).unwrap();
    wb.set_text("Z10", &format!("ssVarRanges({vars})")).unwrap();
    wb.set_text("Z11", "ssConstraintRanges(Z1)").unwrap();
    let c = compile(&wb).unwrap();
    let parts: Vec<String> = c.csp.vars.iter().map(|v| format!("{}:{}", v.name, v.domain)).collect();
    parts.join(" ")
}

fn domain_line(text: &str) -> String {
    let wb = Workbook::from_cells([
        ("A1", text),
        ("B1", "ssVarRanges(A1)"),
        ("B2", "ssConstraintRanges(C1)"),
        ("C1", "A1 #>= 0"),
    ]);
    compile(&wb).unwrap().goals[0].to_string()
}

// Grid values for the aggregate examples.
const AGG_TABLE: &[(&str, &str)] = &[("C1", "3"), ("C2", "1"), ("C3", "3"), ("D1", "1")];
const PAIR_TABLE: &[(&str, &str)] = &[("D3", "8"), ("E3", "1"), ("D4", "3"), ("E4", "3")];

pub fn transformation_goldens() -> Vec<Golden> {
    let s2 = two_sheets();
    let wb = Workbook::default();
    let mut g = vec![
        // list creation
        flat_golden("flatten A1:B2", &wb, "A1:B2", "[A1,B1,A2,B2]"),
        flat_golden("flatten Sheet2!A1:B2", &s2, "Sheet2!A1:B2", "[Sheet2A1,Sheet2B1,Sheet2A2,Sheet2B2]"),
        flat_golden("flatten A1", &wb, "A1", "[A1]"),
        flat_golden("flatten [A1,A5,B6]", &wb, "[A1, A5, B6]", "[A1,A5,B6]"),
        // row and column lists
        range_golden("rows A1:B3", &wb, "A1:B3", rangekit::rows, "[[A1,B1],[A2,B2],[A3,B3]]"),
        range_golden("rows Sheet2!A1:B2", &s2, "Sheet2!A1:B2", rangekit::rows, "[[Sheet2A1,Sheet2B1],[Sheet2A2,Sheet2B2]]"),
        range_golden("cols A1:B3", &wb, "A1:B3", rangekit::cols, "[[A1,A2,A3],[B1,B2,B3]]"),
        range_golden("cols Sheet2!A1:B2", &s2, "Sheet2!A1:B2", rangekit::cols, "[[Sheet2A1,Sheet2A2],[Sheet2B1,Sheet2B2]]"),
        // diagonal lists: canonical order on A1:E4, group set on A1:E5
        range_golden(
            "diagonals A1:E4",
            &wb,
            "A1:E4",
            rangekit::diagonals,
            "[[E1],[D1,E2],[C1,D2,E3],[B1,C2,D3,E4],[A1,B2,C3,D4],[A2,B3,C4],[A3,B4],[A4]]",
        ),
        group_set_golden(
            "diagonals A1:E5 groups",
            "A1:E5",
            rangekit::diagonals,
            &[
                "[A1,B2,C3,D4,E5]",
                "[B1,C2,D3,E4]",
                "[C1,D2,E3]",
                "[D1,E2]",
                "[E1]",
                "[A2,B3,C4,D5]",
                "[A3,B4,C5]",
                "[A4,B5]",
                "[A5]",
            ],
        ),
        range_golden(
            "back diagonals A1:E4",
            &wb,
            "A1:E4",
            rangekit::back_diagonals,
            "[[A1],[B1,A2],[C1,B2,A3],[D1,C2,B3,A4],[E1,D2,C3,B4],[E2,D3,C4],[E3,D4],[E4]]",
        ),
        range_golden("back diagonals A1:B2", &wb, "A1:B2", rangekit::back_diagonals, "[[A1],[B1,A2],[B2]]"),
        group_set_golden(
            "back diagonals A1:E5 groups",
            "A1:E5",
            rangekit::back_diagonals,
            &[
                "[E1,D2,C3,B4,A5]",
                "[E2,D3,C4,B5]",
                "[E3,D4,C5]",
                "[E4,D5]",
                "[E5]",
                "[D1,C2,B3,A4]",
                "[C1,B2,A3]",
                "[B1,A2]",
                "[A1]",
            ],
        ),
    ];

    // result-list length normalization
    for (name, list, n, want) in [
        ("set_len truncate", vec![3, 1, 3], 2, "[3, 1]"),
        ("set_len repeat single", vec![1], 5, "[1, 1, 1, 1, 1]"),
        ("set_len pad last", vec![8, 1, 3, 3], 6, "[8, 1, 3, 3, 3, 3]"),
    ] {
        g.push(Golden { name, expected: want.into(), actual: format!("{:?}", rangekit::set_len(&list, n).unwrap()) });
    }

    // per-cell domain transformation
    for (name, text, want) in [
        ("domain single value", "200", "A1 #= 200"),
        ("domain interval", "1..3", "A1 in 1..3"),
        ("domain value set", "[1,2,3,5,6]", "A1 in [1,2,3,5,6]"),
    ] {
        g.push(Golden { name, expected: want.into(), actual: domain_line(text) });
    }

    g.extend([
        // ssDomain
        Golden {
            name: "ssDomain rect example 1",
            expected: "A1:1..3 B1:1..3 A2:1..3 B2:1..3".into(),
            actual: domains_after("A1:B2", "ssDomain(A1:B2,1,3)"),
        },
        Golden {
            name: "ssDomain enumeration example 2",
            expected: "A1:1..3 A2:1..3 B2:1..3".into(),
            actual: domains_after("[A1,A2,B2]", "ssDomain([A1, A2, B2],1,3)"),
        },
        goal_golden("ssDomain enumeration goal", "[A1,A2,B3]", &[], "ssDomain([A1,A2,B3],1,5)", "[A1,A2,B3] in 1..5"),
        goal_golden("ssDomain rect goal", "A1:B2", &[], "ssDomain(A1:B2,1,3)", "[A1,B1,A2,B2] in 1..3"),
        // ssAllDifferent
        Golden {
            name: "ssAllDifferent rect example 1",
            expected: "A1!=A2 A1!=B1 A1!=B2 A2!=B1 A2!=B2 B1!=B2".into(),
            actual: pairwise("A1:B2", "ssAllDifferent(A1:B2)"),
        },
        Golden {
            name: "ssAllDifferent enumeration example 2",
            expected: "A1!=A2 A1!=B1 A1!=B2 A2!=B1 A2!=B2 B1!=B2".into(),
            actual: pairwise("A1:B2", "ssAllDifferent([A1,A2,B1,B2])"),
        },
        goal_golden("ssAllDifferent enumeration goal", "[A1,B2,E5]", &[], "ssAllDifferent([A1,B2,E5])", "all_different([A1,B2,E5])"),
        goal_golden("ssAllDifferent rect goal", "A1:B2", &[], "ssAllDifferent(A1:B2)", "all_different([A1,B1,A2,B2])"),
        // rows / cols all different
        lowering_golden(
            "ssRowsAllDifferent example 1",
            "A1:B3",
            &[],
            "ssRowsAllDifferent(A1:B3)",
            &["all_different([A1,B1])", "all_different([A2,B2])", "all_different([A3,B3])"],
        ),
        Golden {
            name: "ssColsAllDifferent example 1",
            expected: "A1!=A2 A1!=A3 A2!=A3 B1!=B2 B1!=B3 B2!=B3".into(),
            actual: pairwise("A1:B3", "ssColsAllDifferent(A1:B3)"),
        },
        lowering_golden(
            "ssColsAllDifferent expansion",
            "A1:B3",
            &[],
            "ssColsAllDifferent(A1:B3)",
            &["all_different([A1,A2,A3])", "all_different([B1,B2,B3])"],
        ),
        goal_golden(
            "ssColsAllDifferent goal",
            "A1:B3",
            &[],
            "ssColsAllDifferent(A1:B3)",
            "subListAllDifferent([[A1,A2,A3],[B1,B2,B3]])",
        ),
        // ssColsAggregate
        lowering_golden(
            "ssColsAggregate example 1",
            "A1:E2",
            &[],
            "ssColsAggregate(+,A1:E2,#=,[1,0,1,1,2])",
            &["A1 + A2 #= 1", "B1 + B2 #= 0", "C1 + C2 #= 1", "D1 + D2 #= 1", "E1 + E2 #= 2"],
        ),
        lowering_golden(
            "ssColsAggregate example 2",
            "A1:E2",
            &[],
            "ssColsAggregate(+,A1:E2,#>,1)",
            &["A1 + A2 #> 1", "B1 + B2 #> 1", "C1 + C2 #> 1", "D1 + D2 #> 1", "E1 + E2 #> 1"],
        ),
        lowering_golden(
            "ssColsAggregate example 3",
            "A1:B2",
            AGG_TABLE,
            "ssColsAggregate(+,A1:B2,#>,C1:C3)",
            &["A1 + A2 #> 3", "B1 + B2 #> 1"],
        ),
        goal_golden(
            "ssColsAggregate goal",
            "A1:B2",
            AGG_TABLE,
            "ssColsAggregate(+,A1:B2,#>,C1:C3)",
            "subListAggregate(+, [[A1,A2],[B1,B2]], #>, [3,1])",
        ),
        // ssRowsAggregate
        lowering_golden(
            "ssRowsAggregate example 1",
            "A1:E2",
            &[],
            "ssRowsAggregate(+,A1:E2,#\\=,[1,3])",
            &["A1 + B1 + C1 + D1 + E1 #\\= 1", "A2 + B2 + C2 + D2 + E2 #\\= 3"],
        ),
        lowering_golden(
            "ssRowsAggregate example 2",
            "A1:E2",
            &[],
            "ssRowsAggregate(+,A1:E2,#\\=,1)",
            &["A1 + B1 + C1 + D1 + E1 #\\= 1", "A2 + B2 + C2 + D2 + E2 #\\= 1"],
        ),
        lowering_golden(
            "ssRowsAggregate example 3",
            "A1:B2",
            AGG_TABLE,
            "ssRowsAggregate(+,A1:B2,#\\=,D1)",
            &["A1 + B1 #\\= 1", "A2 + B2 #\\= 1"],
        ),
        // ssPairCellsAggregate
        lowering_golden(
            "ssPairCellsAggregate example 1",
            "[A1:B3,C5:D7]",
            &[],
            "ssPairCellsAggregate(A1:B3,+,C5:D7,#>,[1,2,3,4,6,1])",
            &["A1 + C5 #> 1", "B1 + D5 #> 2", "A2 + C6 #> 3", "B2 + D6 #> 4", "A3 + C7 #> 6", "B3 + D7 #> 1"],
        ),
        lowering_golden(
            "ssPairCellsAggregate example 2",
            "[A1:B3,C5:D7]",
            &[],
            "ssPairCellsAggregate(A1:B3,+,C5:D7,#\\=,1)",
            &[
                "A1 + C5 #\\= 1",
                "B1 + D5 #\\= 1",
                "A2 + C6 #\\= 1",
                "B2 + D6 #\\= 1",
                "A3 + C7 #\\= 1",
                "B3 + D7 #\\= 1",
            ],
        ),
        lowering_golden(
            "ssPairCellsAggregate example 3",
            "[A1:B3,C5:D7]",
            PAIR_TABLE,
            "ssPairCellsAggregate(A1:B3,+,C5:D7,#>,D3:E4)",
            &["A1 + C5 #> 8", "B1 + D5 #> 1", "A2 + C6 #> 3", "B2 + D6 #> 3", "A3 + C7 #> 3", "B3 + D7 #> 3"],
        ),
        goal_golden(
            "ssPairCellsAggregate goal",
            "[A1:B3,C5:D7]",
            &[],
            "ssPairCellsAggregate(A1:B3,+,C5:D7,#>,[1,2,3,4,6,1])",
            "pairsAggregate([A1,B1,A2,B2,A3,B3], +, [C5,D5,C6,D6,C7,D7], #>, [1,2,3,4,6,1])",
        ),
        // ssDiagonalAggregate
        lowering_golden(
            "ssDiagonalAggregate example 1",
            "A1:E4",
            &[],
            "ssDiagonalAggregate(+,A1:E4,#>,[1,2,3,1,1,5,1,1])",
            &[
                "E1 #> 1",
                "D1 + E2 #> 2",
                "C1 + D2 + E3 #> 3",
                "B1 + C2 + D3 + E4 #> 1",
                "A1 + B2 + C3 + D4 #> 1",
                "A2 + B3 + C4 #> 5",
                "A3 + B4 #> 1",
                "A4 #> 1",
            ],
        ),
        lowering_golden(
            "ssDiagonalAggregate example 2",
            "A1:E4",
            &[],
            "ssDiagonalAggregate(+,A1:E4,#>,1)",
            &[
                "E1 #> 1",
                "D1 + E2 #> 1",
                "C1 + D2 + E3 #> 1",
                "B1 + C2 + D3 + E4 #> 1",
                "A1 + B2 + C3 + D4 #> 1",
                "A2 + B3 + C4 #> 1",
                "A3 + B4 #> 1",
                "A4 #> 1",
            ],
        ),
        // ssBackDiagonalAggregate
        lowering_golden(
            "ssBackDiagonalAggregate example 1",
            "A1:E4",
            &[],
            "ssBackDiagonalAggregate(+,A1:E4,#>,[1,2,3,1,1,5,1,1])",
            &[
                "A1 #> 1",
                "B1 + A2 #> 2",
                "C1 + B2 + A3 #> 3",
                "D1 + C2 + B3 + A4 #> 1",
                "E1 + D2 + C3 + B4 #> 1",
                "E2 + D3 + C4 #> 5",
                "E3 + D4 #> 1",
                "E4 #> 1",
            ],
        ),
    ]);
    g
}

// ---------------------------------------------------------------------------
// Session replay against an independent model of the navigation rules.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Build,
    Next,
    Prev,
    Original,
}

pub fn random_actions(rng: &mut impl Rng, len: usize) -> Vec<Action> {
    (0..len)
        .map(|_| match rng.gen_range(0..20) {
            0 => Action::Build,
            1..=8 => Action::Next,
            9..=15 => Action::Prev,
            _ => Action::Original,
        })
        .collect()
}

/// Runs `actions` against a fresh session on `wb`, checking after every step
/// that the grid equals the original with solution `cursor` overlaid on the
/// variable cells `var_cells` (or the original itself when not showing one).
pub fn replay(wb: &Workbook, var_cells: &[CellAddr], actions: &[Action]) -> Result<(), String> {
    let mut s = Session::new(wb.clone());
    let (mut cursor, mut showing, mut count) = (0usize, false, 0usize);
    for (step, a) in actions.iter().enumerate() {
        match a {
            Action::Build => {
                s.parse_build().map_err(|e| format!("step {step}: build failed: {e}"))?;
                count = s.solution_count();
                cursor = 1;
                showing = true;
            }
            Action::Next | Action::Prev => {
                let r = if *a == Action::Next { s.next_solution() } else { s.previous_solution() };
                if count == 0 {
                    if r.is_ok() {
                        return Err(format!("step {step}: navigation succeeded before any build"));
                    }
                } else {
                    if showing {
                        cursor = if *a == Action::Next { (cursor + 1).min(count) } else { cursor.saturating_sub(1).max(1) };
                    }
                    showing = true;
                }
            }
            Action::Original => {
                s.original_state();
                showing = false;
            }
        }
        let want_view = if showing { View::ShowingSolution } else { View::Original };
        if s.view() != want_view || s.cursor() != cursor {
            return Err(format!(
                "step {step} {a:?}: state ({:?}, {}) but model says ({want_view:?}, {cursor})",
                s.view(),
                s.cursor()
            ));
        }
        let mut expected = wb.clone();
        if showing {
            let sol = &s.solutions()[cursor - 1];
            for (cell, v) in var_cells.iter().zip(&sol.values) {
                expected.set(*cell, v.to_string());
            }
        }
        if s.workbook() != &expected {
            return Err(format!("step {step} {a:?}: grid differs from original overlaid with solution {cursor}"));
        }
    }
    Ok(())
}

/// Variable cells of the queens fixture in declaration order.
pub fn queens_cells() -> Vec<CellAddr> {
    let wb = Workbook::default();
    rangekit::flatten(&parse_range_spec("A1:H8", &wb, 0).unwrap())
}

/// Independent check that a 64-value queens assignment is a valid placement.
pub fn queens_valid(vals: &[i64]) -> bool {
    let qs: Vec<(i64, i64)> = (0..64).filter(|i| vals[*i] == 1).map(|i| ((i / 8) as i64, (i % 8) as i64)).collect();
    qs.len() == 8
        && qs.iter().enumerate().all(|(i, a)| {
            qs[i + 1..].iter().all(|b| a.0 != b.0 && a.1 != b.1 && (a.0 - b.0).abs() != (a.1 - b.1).abs())
        })
}

/// Every row, column and 3x3 block of a 9x9 grid (row-major values) is a permutation of 1..9.
pub fn sudoku_groups_ok(vals: &[i64]) -> usize {
    let mut ok = 0;
    let perm = |xs: Vec<i64>| {
        let mut xs = xs;
        xs.sort();
        xs == (1..=9).collect::<Vec<_>>()
    };
    for k in 0..9 {
        ok += perm((0..9).map(|c| vals[k * 9 + c]).collect()) as usize;
        ok += perm((0..9).map(|r| vals[r * 9 + k]).collect()) as usize;
        let (br, bc) = (k / 3 * 3, k % 3 * 3);
        ok += perm((0..9).map(|i| vals[(br + i / 3) * 9 + bc + i % 3]).collect()) as usize;
    }
    ok
}
