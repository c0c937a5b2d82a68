//! The cell formula language: domain literals, `ss*` constraint functions,
//! `Expr RelOp Expr` arithmetic constraints and the ssVarRanges /
//! ssConstraintRanges markers.
//!
//! ```text
//! formula     = marker | ss_call | arith_rel
//! marker      = ("ssVarRanges" | "ssConstraintRanges") "(" range { "," range } ")"
//! arith_rel   = expr relop expr
//! relop       = "#=" | "#\=" | "#<" | "#>" | "#=<" | "#>="
//! expr        = term { ("+" | "-") term }
//! term        = factor { ("*" | "mod") factor }
//! factor      = int | cell | "(" expr ")" | "abs" "(" expr ")"
//!             | ("min" | "max") "(" expr "," expr ")"
//! int         = [ "-" ] digits
//! range       = item | "[" item { "," item } "]"
//! item        = cell [ ":" cell ]
//! cell        = [ sheet "!" ] letters digits
//! result_list = int | "[" int { "," int } "]" | range
//! domain      = int | int ".." int | "[" int { "," int } "]"
//! ```
//!
//! Function names and keywords are case-insensitive. Whitespace is ignored.

use std::fmt;

use thiserror::Error;

use crate::error::{CompileError, CompileErrorKind};
use crate::grid::{clean_cell_text, parse_local_addr, CellAddr, GridError, RangeSpec, Workbook};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty formula")]
    Empty,
    #[error("unexpected character `{0}`")]
    BadChar(char),
    #[error("integer literal out of range")]
    IntOverflow,
    #[error("`{0}` is not a relational operator (use #=, #\\=, #<, #>, #=< or #>=)")]
    BadRelOp(String),
    #[error("division is not supported")]
    DivisionUnsupported,
    #[error("unary minus is only allowed on integer literals")]
    UnaryMinus,
    #[error("unexpected `{0}`")]
    Unexpected(String),
    #[error("unexpected end of formula")]
    UnexpectedEnd,
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("{function} takes {expected} argument(s), found {found}")]
    Arity { function: &'static str, expected: &'static str, found: usize },
    #[error("{0} requires a rectangular C_TL:C_BR range")]
    MatrixRequired(&'static str),
    #[error("range corners lie on different sheets")]
    MixedSheetRect,
    #[error("empty enumeration")]
    EmptyEnumeration,
    #[error("enumerations cannot be nested")]
    NestedEnumeration,
    #[error("inverted interval {0}..{1}")]
    InvertedInterval(i64, i64),
    #[error("empty value set")]
    EmptyValueSet,
    #[error("`{0}` is not a binary arithmetic operator (use +, - or *)")]
    BadArithOp(String),
    #[error("a marker function cannot be used as a constraint")]
    MarkerAsConstraint,
    #[error(transparent)]
    Address(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainLiteral {
    SingleValue(i64),
    Interval(i64, i64),
    /// Sorted ascending, no duplicates.
    ValueSet(Vec<i64>),
}

impl fmt::Display for DomainLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainLiteral::SingleValue(v) => write!(f, "{v}"),
            DomainLiteral::Interval(lo, hi) => write!(f, "{lo}..{hi}"),
            DomainLiteral::ValueSet(vs) => {
                let parts: Vec<String> = vs.iter().map(i64::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl RelOp {
    pub fn token(self) -> &'static str {
        match self {
            RelOp::Eq => "#=",
            RelOp::Neq => "#\\=",
            RelOp::Lt => "#<",
            RelOp::Gt => "#>",
            RelOp::Le => "#=<",
            RelOp::Ge => "#>=",
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Neq => a != b,
            RelOp::Lt => a < b,
            RelOp::Gt => a > b,
            RelOp::Le => a <= b,
            RelOp::Ge => a >= b,
        }
    }

    pub const ALL: [RelOp; 6] = [RelOp::Eq, RelOp::Neq, RelOp::Lt, RelOp::Gt, RelOp::Le, RelOp::Ge];
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinArithOp {
    Plus,
    Minus,
    Times,
}

impl BinArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinArithOp::Plus => "+",
            BinArithOp::Minus => "-",
            BinArithOp::Times => "*",
        }
    }

    /// `None` on overflow.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            BinArithOp::Plus => a.checked_add(b),
            BinArithOp::Minus => a.checked_sub(b),
            BinArithOp::Times => a.checked_mul(b),
        }
    }

    pub const ALL: [BinArithOp; 3] = [BinArithOp::Plus, BinArithOp::Minus, BinArithOp::Times];
}

impl fmt::Display for BinArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithExpr {
    CellRef(CellAddr),
    IntLit(i64),
    BinOp(BinArithOp, Box<ArithExpr>, Box<ArithExpr>),
    Mod(Box<ArithExpr>, Box<ArithExpr>),
    Abs(Box<ArithExpr>),
    Min2(Box<ArithExpr>, Box<ArithExpr>),
    Max2(Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    /// Cells referenced, left to right.
    pub fn cells(&self, out: &mut Vec<CellAddr>) {
        match self {
            ArithExpr::CellRef(a) => out.push(*a),
            ArithExpr::IntLit(_) => {}
            ArithExpr::Abs(e) => e.cells(out),
            ArithExpr::BinOp(_, a, b) | ArithExpr::Mod(a, b) | ArithExpr::Min2(a, b) | ArithExpr::Max2(a, b) => {
                a.cells(out);
                b.cells(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultListSpec {
    LiteralList(Vec<i64>),
    Scalar(i64),
    RangeRef(RangeSpec),
    CellRef(CellAddr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintAst {
    Domain(RangeSpec, i64, i64),
    AllDifferent(RangeSpec),
    RowsAllDifferent(RangeSpec),
    ColsAllDifferent(RangeSpec),
    ColsAggregate(BinArithOp, RangeSpec, RelOp, ResultListSpec),
    RowsAggregate(BinArithOp, RangeSpec, RelOp, ResultListSpec),
    DiagonalAggregate(BinArithOp, RangeSpec, RelOp, ResultListSpec),
    BackDiagonalAggregate(BinArithOp, RangeSpec, RelOp, ResultListSpec),
    PairCellsAggregate(RangeSpec, BinArithOp, RangeSpec, RelOp, ResultListSpec),
    NthElement(ArithExpr, RangeSpec, CellAddr),
    /// The range is checked to be a single variable cell at lowering.
    Minimize(RangeSpec),
    Maximize(RangeSpec),
    ArithRel(ArithExpr, RelOp, ArithExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkerKind {
    VarRanges,
    ConstraintRanges,
}

impl fmt::Display for MarkerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkerKind::VarRanges => "ssVarRanges",
            MarkerKind::ConstraintRanges => "ssConstraintRanges",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerDecl {
    pub kind: MarkerKind,
    pub ranges: Vec<RangeSpec>,
    pub location: CellAddr,
}

/// Anything a cell formula can parse to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Marker(MarkerKind, Vec<RangeSpec>),
    Constraint(ConstraintAst),
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Bang,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(RelOp),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => f.write_str(s),
            Tok::Int(v) => write!(f, "{v}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::LBrack => f.write_str("["),
            Tok::RBrack => f.write_str("]"),
            Tok::Comma => f.write_str(","),
            Tok::Colon => f.write_str(":"),
            Tok::Bang => f.write_str("!"),
            Tok::DotDot => f.write_str(".."),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Slash => f.write_str("/"),
            Tok::Rel(r) => f.write_str(r.token()),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Tok>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => { toks.push(Tok::LParen); i += 1 }
            b')' => { toks.push(Tok::RParen); i += 1 }
            b'[' => { toks.push(Tok::LBrack); i += 1 }
            b']' => { toks.push(Tok::RBrack); i += 1 }
            b',' => { toks.push(Tok::Comma); i += 1 }
            b':' => { toks.push(Tok::Colon); i += 1 }
            b'!' => { toks.push(Tok::Bang); i += 1 }
            b'+' => { toks.push(Tok::Plus); i += 1 }
            b'-' => { toks.push(Tok::Minus); i += 1 }
            b'*' => { toks.push(Tok::Star); i += 1 }
            b'/' => { toks.push(Tok::Slash); i += 1 }
            b'.' if bytes.get(i + 1) == Some(&b'.') => { toks.push(Tok::DotDot); i += 2 }
            b'#' => {
                let rest = &text[i..];
                let (rel, len) = if rest.starts_with("#\\=") {
                    (RelOp::Neq, 3)
                } else if rest.starts_with("#=<") {
                    (RelOp::Le, 3)
                } else if rest.starts_with("#>=") {
                    (RelOp::Ge, 3)
                } else if rest.starts_with("#=") {
                    (RelOp::Eq, 2)
                } else if rest.starts_with("#<") {
                    (RelOp::Lt, 2)
                } else if rest.starts_with("#>") {
                    (RelOp::Gt, 2)
                } else {
                    let bad: String = rest.chars().take_while(|c| !c.is_whitespace()).take(4).collect();
                    return Err(ParseError::BadRelOp(bad));
                };
                toks.push(Tok::Rel(rel));
                i += len;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v: i64 = text[start..i].parse().map_err(|_| ParseError::IntOverflow)?;
                toks.push(Tok::Int(v));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push(Tok::Ident(text[start..i].to_string()));
            }
            b'<' | b'>' | b'=' => {
                let bad: String = text[i..].chars().take_while(|c| "<>=\\".contains(*c)).collect();
                return Err(ParseError::BadRelOp(bad));
            }
            _ => return Err(ParseError::BadChar(text[i..].chars().next().unwrap_or('?'))),
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    wb: &'a Workbook,
    current: usize,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Tok], wb: &'a Workbook, current: usize) -> Self {
        Parser { toks, pos: 0, wb, current }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + off)
    }

    fn next(&mut self) -> Result<&'a Tok, ParseError> {
        let t = self.toks.get(self.pos).ok_or(ParseError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        let t = self.next()?;
        if t == want {
            Ok(())
        } else {
            Err(ParseError::Unexpected(t.to_string()))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(ParseError::Unexpected(t.to_string())),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        match self.next()? {
            Tok::Int(v) => Ok(*v),
            Tok::Minus => match self.next()? {
                Tok::Int(v) => Ok(-*v),
                t => Err(ParseError::Unexpected(t.to_string())),
            },
            t => Err(ParseError::Unexpected(t.to_string())),
        }
    }

    fn starts_int(&self) -> bool {
        matches!(self.peek(), Some(Tok::Int(_)))
            || (self.peek() == Some(&Tok::Minus) && matches!(self.peek_at(1), Some(Tok::Int(_))))
    }

    /// `[sheet!]A1`; `default_sheet` applies when unqualified.
    fn cell(&mut self, default_sheet: usize) -> Result<(CellAddr, bool), ParseError> {
        let first = match self.next()? {
            Tok::Ident(s) => s,
            t => return Err(ParseError::Unexpected(t.to_string())),
        };
        let (sheet, local, qualified) = if self.eat(&Tok::Bang) {
            let idx = self
                .wb
                .sheet_index(first)
                .ok_or_else(|| GridError::UnknownSheet(first.clone()))?;
            match self.next()? {
                Tok::Ident(s) => (idx, s, true),
                t => return Err(ParseError::Unexpected(t.to_string())),
            }
        } else {
            (default_sheet, first, false)
        };
        let (col, row) = parse_local_addr(local)?;
        Ok((CellAddr::new(sheet, col, row), qualified))
    }

    fn range_item(&mut self) -> Result<RangeSpec, ParseError> {
        let (a, _) = self.cell(self.current)?;
        if !self.eat(&Tok::Colon) {
            return Ok(RangeSpec::Single(a));
        }
        let (b, qualified) = self.cell(a.sheet)?;
        if qualified && b.sheet != a.sheet {
            return Err(ParseError::MixedSheetRect);
        }
        Ok(RangeSpec::rect(a, b).expect("same sheet"))
    }

    fn range(&mut self) -> Result<RangeSpec, ParseError> {
        if !self.eat(&Tok::LBrack) {
            return self.range_item();
        }
        if self.eat(&Tok::RBrack) {
            return Err(ParseError::EmptyEnumeration);
        }
        let mut items = Vec::new();
        loop {
            if self.peek() == Some(&Tok::LBrack) {
                return Err(ParseError::NestedEnumeration);
            }
            items.push(self.range_item()?);
            if self.eat(&Tok::RBrack) {
                break;
            }
            self.expect(&Tok::Comma)?;
        }
        Ok(RangeSpec::Enumeration(items))
    }

    fn rel_op(&mut self) -> Result<RelOp, ParseError> {
        match self.next()? {
            Tok::Rel(r) => Ok(*r),
            t => Err(ParseError::BadRelOp(t.to_string())),
        }
    }

    fn arith_op(&mut self) -> Result<BinArithOp, ParseError> {
        match self.next()? {
            Tok::Plus => Ok(BinArithOp::Plus),
            Tok::Minus => Ok(BinArithOp::Minus),
            Tok::Star => Ok(BinArithOp::Times),
            Tok::Slash => Err(ParseError::DivisionUnsupported),
            t => Err(ParseError::BadArithOp(t.to_string())),
        }
    }

    fn result_list(&mut self) -> Result<ResultListSpec, ParseError> {
        if self.starts_int() {
            return Ok(ResultListSpec::Scalar(self.int()?));
        }
        if self.peek() == Some(&Tok::LBrack) {
            let is_literal = matches!(self.peek_at(1), Some(Tok::Int(_)) | Some(Tok::Minus));
            if is_literal {
                self.next()?;
                let mut vals = vec![self.int()?];
                while self.eat(&Tok::Comma) {
                    vals.push(self.int()?);
                }
                self.expect(&Tok::RBrack)?;
                return Ok(ResultListSpec::LiteralList(vals));
            }
        }
        Ok(match self.range()? {
            RangeSpec::Single(a) => ResultListSpec::CellRef(a),
            other => ResultListSpec::RangeRef(other),
        })
    }

    fn expr(&mut self) -> Result<ArithExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinArithOp::Plus,
                Some(Tok::Minus) => BinArithOp::Minus,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ArithExpr::BinOp(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ArithExpr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ArithExpr::BinOp(BinArithOp::Times, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("mod") => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ArithExpr::Mod(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => return Err(ParseError::DivisionUnsupported),
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ArithExpr, ParseError> {
        match self.peek().ok_or(ParseError::UnexpectedEnd)? {
            Tok::Int(_) => Ok(ArithExpr::IntLit(self.int()?)),
            Tok::Minus => {
                if matches!(self.peek_at(1), Some(Tok::Int(_))) {
                    Ok(ArithExpr::IntLit(self.int()?))
                } else {
                    Err(ParseError::UnaryMinus)
                }
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if self.peek_at(1) == Some(&Tok::LParen) => {
                let lname = name.to_ascii_lowercase();
                self.pos += 2;
                let e = match lname.as_str() {
                    "abs" => ArithExpr::Abs(Box::new(self.expr()?)),
                    "min" | "max" => {
                        let a = Box::new(self.expr()?);
                        self.expect(&Tok::Comma)?;
                        let b = Box::new(self.expr()?);
                        if lname == "min" { ArithExpr::Min2(a, b) } else { ArithExpr::Max2(a, b) }
                    }
                    _ => return Err(ParseError::UnknownFunction(name.clone())),
                };
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(ArithExpr::CellRef(self.cell(self.current)?.0)),
            t => Err(ParseError::Unexpected(t.to_string())),
        }
    }
}

/// Splits the tokens between a call's parentheses at top-level commas.
/// `toks` starts just after the opening parenthesis; returns the argument
/// slices and the index just past the closing parenthesis.
fn split_args(toks: &[Tok]) -> Result<(Vec<&[Tok]>, usize), ParseError> {
    let mut depth = 0usize;
    let mut start = 0;
    let mut args = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        match t {
            Tok::LParen | Tok::LBrack => depth += 1,
            Tok::RBrack => depth = depth.checked_sub(1).ok_or(ParseError::Unexpected("]".into()))?,
            Tok::RParen if depth == 0 => {
                if i > start || !args.is_empty() {
                    args.push(&toks[start..i]);
                }
                return Ok((args, i + 1));
            }
            Tok::RParen => depth -= 1,
            Tok::Comma if depth == 0 => {
                args.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    Err(ParseError::UnexpectedEnd)
}

/// Runs `f` over a full argument slice, requiring it to consume every token.
fn sub<'a, T>(
    arg: &'a [Tok],
    wb: &'a Workbook,
    current: usize,
    f: impl FnOnce(&mut Parser<'a>) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    if arg.is_empty() {
        return Err(ParseError::UnexpectedEnd);
    }
    let mut p = Parser::new(arg, wb, current);
    let v = f(&mut p)?;
    p.finish()?;
    Ok(v)
}

fn rect_arg(arg: &[Tok], wb: &Workbook, current: usize, function: &'static str) -> Result<RangeSpec, ParseError> {
    let r = sub(arg, wb, current, Parser::range)?;
    if r.is_rect() {
        Ok(r)
    } else {
        Err(ParseError::MatrixRequired(function))
    }
}

fn arity(function: &'static str, expected: &'static str, args: &[&[Tok]], n: usize) -> Result<(), ParseError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(ParseError::Arity { function, expected, found: args.len() })
    }
}

const FUNCTIONS: &[&str] = &[
    "ssDomain",
    "ssAllDifferent",
    "ssRowsAllDifferent",
    "ssColsAllDifferent",
    "ssColsAggregate",
    "ssRowsAggregate",
    "ssDiagonalAggregate",
    "ssBackDiagonalAggregate",
    "ssPairCellsAggregate",
    "nthElement",
    "ssMin",
    "ssMax",
    "ssVarRanges",
    "ssConstraintRanges",
];

fn canonical_function(name: &str) -> Option<&'static str> {
    if name.eq_ignore_ascii_case("ssNthElement") {
        return Some("nthElement");
    }
    FUNCTIONS.iter().copied().find(|f| f.eq_ignore_ascii_case(name))
}

fn parse_call(
    function: &'static str,
    args: &[&[Tok]],
    wb: &Workbook,
    current: usize,
) -> Result<Formula, ParseError> {
    use ConstraintAst as C;
    let range = |a: &[Tok]| sub(a, wb, current, Parser::range);
    let rel = |a: &[Tok]| sub(a, wb, current, Parser::rel_op);
    let op = |a: &[Tok]| sub(a, wb, current, Parser::arith_op);
    let int = |a: &[Tok]| sub(a, wb, current, Parser::int);
    let rl = |a: &[Tok]| sub(a, wb, current, Parser::result_list);
    let ast = match function {
        "ssVarRanges" | "ssConstraintRanges" => {
            if args.is_empty() {
                return Err(ParseError::Arity { function, expected: "at least 1", found: 0 });
            }
            let ranges = args.iter().map(|a| range(a)).collect::<Result<Vec<_>, _>>()?;
            let kind = if function == "ssVarRanges" { MarkerKind::VarRanges } else { MarkerKind::ConstraintRanges };
            return Ok(Formula::Marker(kind, ranges));
        }
        "ssDomain" => {
            arity(function, "3", args, 3)?;
            C::Domain(range(args[0])?, int(args[1])?, int(args[2])?)
        }
        "ssAllDifferent" => {
            arity(function, "1", args, 1)?;
            C::AllDifferent(range(args[0])?)
        }
        "ssRowsAllDifferent" => {
            arity(function, "1", args, 1)?;
            C::RowsAllDifferent(rect_arg(args[0], wb, current, function)?)
        }
        "ssColsAllDifferent" => {
            arity(function, "1", args, 1)?;
            C::ColsAllDifferent(rect_arg(args[0], wb, current, function)?)
        }
        "ssColsAggregate" | "ssRowsAggregate" | "ssDiagonalAggregate" | "ssBackDiagonalAggregate" => {
            arity(function, "4", args, 4)?;
            let o = op(args[0])?;
            let r = rect_arg(args[1], wb, current, function)?;
            let rop = rel(args[2])?;
            let list = rl(args[3])?;
            match function {
                "ssColsAggregate" => C::ColsAggregate(o, r, rop, list),
                "ssRowsAggregate" => C::RowsAggregate(o, r, rop, list),
                "ssDiagonalAggregate" => C::DiagonalAggregate(o, r, rop, list),
                _ => C::BackDiagonalAggregate(o, r, rop, list),
            }
        }
        "ssPairCellsAggregate" => {
            arity(function, "5", args, 5)?;
            C::PairCellsAggregate(
                rect_arg(args[0], wb, current, function)?,
                op(args[1])?,
                rect_arg(args[2], wb, current, function)?,
                rel(args[3])?,
                rl(args[4])?,
            )
        }
        "nthElement" => {
            arity(function, "3", args, 3)?;
            let index = sub(args[0], wb, current, |p| {
                if p.starts_int() {
                    Ok(ArithExpr::IntLit(p.int()?))
                } else {
                    Ok(ArithExpr::CellRef(p.cell(current)?.0))
                }
            })?;
            let table = range(args[1])?;
            let value = sub(args[2], wb, current, |p| Ok(p.cell(current)?.0))?;
            C::NthElement(index, table, value)
        }
        "ssMin" | "ssMax" => {
            arity(function, "1", args, 1)?;
            let r = range(args[0])?;
            if function == "ssMin" { C::Minimize(r) } else { C::Maximize(r) }
        }
        _ => unreachable!("function table and dispatch disagree"),
    };
    Ok(Formula::Constraint(ast))
}

/// Parses any cell formula. A leading `=` or `@` is ignored.
pub fn parse_formula(text: &str, wb: &Workbook, current: usize) -> Result<Formula, ParseError> {
    let text = clean_cell_text(text);
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    if let (Tok::Ident(name), Some(Tok::LParen)) = (&toks[0], toks.get(1)) {
        let lname = name.to_ascii_lowercase();
        if lname != "abs" && lname != "min" && lname != "max" {
            let function = canonical_function(name).ok_or_else(|| ParseError::UnknownFunction(name.clone()))?;
            let (args, end) = split_args(&toks[2..])?;
            if let Some(t) = toks.get(2 + end) {
                return Err(ParseError::Unexpected(t.to_string()));
            }
            return parse_call(function, &args, wb, current);
        }
    }
    let mut p = Parser::new(&toks, wb, current);
    let lhs = p.expr()?;
    let rel = p.rel_op()?;
    let rhs = p.expr()?;
    p.finish()?;
    Ok(Formula::Constraint(ConstraintAst::ArithRel(lhs, rel, rhs)))
}

pub fn parse_constraint(text: &str, wb: &Workbook, current: usize) -> Result<ConstraintAst, ParseError> {
    match parse_formula(text, wb, current)? {
        Formula::Constraint(c) => Ok(c),
        Formula::Marker(..) => Err(ParseError::MarkerAsConstraint),
    }
}

pub fn parse_range_spec(text: &str, wb: &Workbook, current: usize) -> Result<RangeSpec, ParseError> {
    let toks = lex(text)?;
    sub(&toks, wb, current, Parser::range).map_err(|e| match e {
        ParseError::UnexpectedEnd if toks.is_empty() => ParseError::Empty,
        e => e,
    })
}

pub fn parse_domain_literal(text: &str) -> Result<DomainLiteral, ParseError> {
    let toks = lex(clean_cell_text(text))?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let wb = Workbook::default();
    let mut p = Parser::new(&toks, &wb, 0);
    let lit = if p.eat(&Tok::LBrack) {
        if p.eat(&Tok::RBrack) {
            return Err(ParseError::EmptyValueSet);
        }
        let mut vals = vec![p.int()?];
        while p.eat(&Tok::Comma) {
            vals.push(p.int()?);
        }
        p.expect(&Tok::RBrack)?;
        vals.sort_unstable();
        vals.dedup();
        DomainLiteral::ValueSet(vals)
    } else {
        let lo = p.int()?;
        if p.eat(&Tok::DotDot) {
            let hi = p.int()?;
            if lo > hi {
                return Err(ParseError::InvertedInterval(lo, hi));
            }
            DomainLiteral::Interval(lo, hi)
        } else {
            DomainLiteral::SingleValue(lo)
        }
    };
    p.finish()?;
    Ok(lit)
}

// ---------------------------------------------------------------------------
// Rendering

fn expr_prec(e: &ArithExpr) -> u8 {
    match e {
        ArithExpr::BinOp(BinArithOp::Plus | BinArithOp::Minus, ..) => 1,
        ArithExpr::BinOp(BinArithOp::Times, ..) | ArithExpr::Mod(..) => 2,
        _ => 3,
    }
}

/// Writes `e` with the fewest parentheses that reparse to the same tree.
/// `leaf` renders a cell reference.
pub fn render_expr(e: &ArithExpr, leaf: &dyn Fn(CellAddr) -> String) -> String {
    let child = |c: &ArithExpr, min_prec: u8| {
        let s = render_expr(c, leaf);
        if expr_prec(c) < min_prec { format!("({s})") } else { s }
    };
    match e {
        ArithExpr::CellRef(a) => leaf(*a),
        ArithExpr::IntLit(v) => v.to_string(),
        ArithExpr::BinOp(op, a, b) => {
            let p = expr_prec(e);
            format!("{} {} {}", child(a, p), op.symbol(), child(b, p + 1))
        }
        ArithExpr::Mod(a, b) => format!("{} mod {}", child(a, 2), child(b, 3)),
        ArithExpr::Abs(a) => format!("abs({})", render_expr(a, leaf)),
        ArithExpr::Min2(a, b) => format!("min({}, {})", render_expr(a, leaf), render_expr(b, leaf)),
        ArithExpr::Max2(a, b) => format!("max({}, {})", render_expr(a, leaf), render_expr(b, leaf)),
    }
}

fn render_result_list(rl: &ResultListSpec, wb: &Workbook, current: usize) -> String {
    match rl {
        ResultListSpec::LiteralList(vs) => {
            let parts: Vec<String> = vs.iter().map(i64::to_string).collect();
            format!("[{}]", parts.join(", "))
        }
        ResultListSpec::Scalar(v) => v.to_string(),
        ResultListSpec::RangeRef(r) => r.render(wb, current),
        ResultListSpec::CellRef(a) => wb.format_addr(*a, current),
    }
}

impl ConstraintAst {
    /// Formula text that parses back to `self` when read on sheet `current`.
    pub fn render(&self, wb: &Workbook, current: usize) -> String {
        use ConstraintAst as C;
        let r = |s: &RangeSpec| s.render(wb, current);
        let rl = |l: &ResultListSpec| render_result_list(l, wb, current);
        let cell = |a: CellAddr| wb.format_addr(a, current);
        match self {
            C::Domain(s, lo, hi) => format!("ssDomain({}, {lo}, {hi})", r(s)),
            C::AllDifferent(s) => format!("ssAllDifferent({})", r(s)),
            C::RowsAllDifferent(s) => format!("ssRowsAllDifferent({})", r(s)),
            C::ColsAllDifferent(s) => format!("ssColsAllDifferent({})", r(s)),
            C::ColsAggregate(o, s, rel, l) => format!("ssColsAggregate({o}, {}, {rel}, {})", r(s), rl(l)),
            C::RowsAggregate(o, s, rel, l) => format!("ssRowsAggregate({o}, {}, {rel}, {})", r(s), rl(l)),
            C::DiagonalAggregate(o, s, rel, l) => format!("ssDiagonalAggregate({o}, {}, {rel}, {})", r(s), rl(l)),
            C::BackDiagonalAggregate(o, s, rel, l) => {
                format!("ssBackDiagonalAggregate({o}, {}, {rel}, {})", r(s), rl(l))
            }
            C::PairCellsAggregate(a, o, b, rel, l) => {
                format!("ssPairCellsAggregate({}, {o}, {}, {rel}, {})", r(a), r(b), rl(l))
            }
            C::NthElement(i, t, v) => format!("nthElement({}, {}, {})", render_expr(i, &cell), r(t), cell(*v)),
            C::Minimize(s) => format!("ssMin({})", r(s)),
            C::Maximize(s) => format!("ssMax({})", r(s)),
            C::ArithRel(a, rel, b) => format!("{} {rel} {}", render_expr(a, &cell), render_expr(b, &cell)),
        }
    }
}

// ---------------------------------------------------------------------------
// Marker discovery

pub(crate) fn marker_kind_of(text: &str) -> Option<MarkerKind> {
    let t = clean_cell_text(text);
    let starts = |p: &str| t.len() >= p.len() && t[..p.len()].eq_ignore_ascii_case(p);
    if starts("ssVarRanges") {
        Some(MarkerKind::VarRanges)
    } else if starts("ssConstraintRanges") {
        Some(MarkerKind::ConstraintRanges)
    } else {
        None
    }
}

/// Finds the single ssVarRanges and ssConstraintRanges cell in `wb`,
/// scanning every sheet row-major. Unqualified ranges bind to the sheet
/// holding the marker.
pub fn find_markers(wb: &Workbook) -> Result<(MarkerDecl, MarkerDecl), CompileError> {
    let mut vars: Option<MarkerDecl> = None;
    let mut cons: Option<MarkerDecl> = None;
    for (si, sheet) in wb.sheets().iter().enumerate() {
        for (col, row, text) in sheet.cells() {
            let Some(kind) = marker_kind_of(text) else { continue };
            let location = CellAddr::new(si, col, row);
            let at = wb.qualified_addr(location);
            let ranges = match parse_formula(text, wb, si) {
                Ok(Formula::Marker(k, ranges)) if k == kind => ranges,
                Ok(_) => {
                    let kind = CompileErrorKind::Parse(ParseError::UnknownFunction(clean_cell_text(text).to_string()));
                    return Err(CompileError::at(kind, at));
                }
                Err(e) => return Err(CompileError::at(CompileErrorKind::Parse(e), at)),
            };
            let slot = match kind {
                MarkerKind::VarRanges => &mut vars,
                MarkerKind::ConstraintRanges => &mut cons,
            };
            if slot.is_some() {
                return Err(CompileError::at(CompileErrorKind::DuplicateMarker(kind), at));
            }
            *slot = Some(MarkerDecl { kind, ranges, location });
        }
    }
    let vars = vars.ok_or_else(|| CompileError::new(CompileErrorKind::MissingVarRanges))?;
    let cons = cons.ok_or_else(|| CompileError::new(CompileErrorKind::MissingConstraintRanges))?;
    Ok((vars, cons))
}
