//! Exact evaluation of formula trees.

mod clamp;
mod functions;

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

pub use clamp::{as_clamp, clamp, ClampForm};

use crate::address::{CellAddress, Coord};
use crate::formula::{parse_formula, CellRef, Expr};
use crate::graph::{resolve_name, resolve_ref, Resolved, RANGE_EXPANSION_CAP};
use crate::number::{format_fixed, format_general, int, Rational};
use crate::workbook::{Literal, NumberFormat, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    Div0,
    Value,
    Na,
    Unsupported,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::Value => "#VALUE!",
            ErrorCode::Na => "#N/A",
            ErrorCode::Unsupported => "#UNSUPPORTED!",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Value {
    Number(Rational),
    Text(String),
    Bool(bool),
    #[default]
    Blank,
    Error(ErrorCode),
}

impl Value {
    pub fn num(n: i64) -> Value {
        Value::Number(int(n))
    }

    pub fn as_number(&self) -> Option<&Rational> {
        match self {
            Value::Number(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error(_))
    }

    /// Numeric coercion for arithmetic: Blank is 0 and booleans are 1/0.
    fn to_number(&self) -> Result<Rational, ErrorCode> {
        match self {
            Value::Number(n) => Ok(n.clone()),
            Value::Blank => Ok(Rational::zero()),
            Value::Bool(b) => Ok(int(i64::from(*b))),
            Value::Text(_) => Err(ErrorCode::Value),
            Value::Error(e) => Err(*e),
        }
    }

    fn to_text(&self) -> Result<String, ErrorCode> {
        match self {
            Value::Number(n) => Ok(format_general(n)),
            Value::Text(t) => Ok(t.clone()),
            Value::Bool(b) => Ok(bool_text(*b).to_string()),
            Value::Blank => Ok(String::new()),
            Value::Error(e) => Err(*e),
        }
    }

    fn to_bool(&self) -> Result<bool, ErrorCode> {
        match self {
            Value::Number(n) => Ok(!n.is_zero()),
            Value::Bool(b) => Ok(*b),
            Value::Blank => Ok(false),
            Value::Text(t) if t.eq_ignore_ascii_case("TRUE") => Ok(true),
            Value::Text(t) if t.eq_ignore_ascii_case("FALSE") => Ok(false),
            Value::Text(_) => Err(ErrorCode::Value),
            Value::Error(e) => Err(*e),
        }
    }
}

impl From<&Literal> for Value {
    fn from(lit: &Literal) -> Self {
        match lit {
            Literal::Number(n) => Value::Number(n.clone()),
            Literal::Text(t) => Value::Text(t.clone()),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Blank => Value::Blank,
        }
    }
}

impl From<Rational> for Value {
    fn from(n: Rational) -> Self {
        Value::Number(n)
    }
}

fn bool_text(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, &NumberFormat::general()))
    }
}

/// Display text under a number format. Fixed formats round half away from
/// zero; General and unsupported formats print the shortest exact decimal.
pub fn render(value: &Value, format: &NumberFormat) -> String {
    match value {
        Value::Number(n) => match format.decimals() {
            Some(places) => format_fixed(n, places),
            None => format_general(n),
        },
        Value::Text(t) => t.clone(),
        Value::Bool(b) => bool_text(*b).to_string(),
        Value::Blank => String::new(),
        Value::Error(e) => e.as_str().to_string(),
    }
}

/// Where referenced values come from.
pub(crate) trait Context {
    fn cell(&mut self, addr: &CellAddress) -> Value;
    /// Resolves a reference to an address; `None` when the sheet is unknown.
    fn locate(&self, r: &CellRef) -> Option<CellAddress>;
    fn name(&self, name: &str) -> Option<Resolved>;
}

/// Values for a standalone evaluation. Unqualified references resolve on
/// `sheet`; anything missing reads as Blank.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub sheet: String,
    pub values: HashMap<CellAddress, Value>,
}

impl Env {
    pub fn new(sheet: &str) -> Self {
        Env { sheet: sheet.to_string(), values: HashMap::new() }
    }

    pub fn with(mut self, a1: &str, value: Value) -> Self {
        self.values.insert(CellAddress::at(&self.sheet, a1), value);
        self
    }
}

impl Context for &Env {
    fn cell(&mut self, addr: &CellAddress) -> Value {
        self.values.get(addr).cloned().unwrap_or_default()
    }

    fn locate(&self, r: &CellRef) -> Option<CellAddress> {
        Some(r.resolve(&self.sheet))
    }

    fn name(&self, _name: &str) -> Option<Resolved> {
        None
    }
}

/// Evaluates a formula against an environment. Errors are values.
pub fn evaluate(ast: &Expr, env: &Env) -> Value {
    let mut ctx = env;
    finish(eval(ast, &mut ctx))
}

/// A formula whose result is an empty reference shows 0.
fn finish(v: Value) -> Value {
    match v {
        Value::Blank => Value::num(0),
        other => other,
    }
}

/// Evaluates cells of a workbook, memoizing results. Overrides replace a
/// cell's stored content (literal or formula) with a fixed value.
pub struct WorkbookEvaluator<'a> {
    wb: &'a Workbook,
    overrides: HashMap<CellAddress, Value>,
    cache: HashMap<CellAddress, Value>,
    active: HashSet<CellAddress>,
    parsed: HashMap<CellAddress, Option<Expr>>,
}

impl<'a> WorkbookEvaluator<'a> {
    pub fn new(wb: &'a Workbook) -> Self {
        WorkbookEvaluator {
            wb,
            overrides: HashMap::new(),
            cache: HashMap::new(),
            active: HashSet::new(),
            parsed: HashMap::new(),
        }
    }

    pub fn with_overrides(wb: &'a Workbook, overrides: HashMap<CellAddress, Value>) -> Self {
        WorkbookEvaluator { overrides, ..Self::new(wb) }
    }

    pub fn set_override(&mut self, addr: CellAddress, value: Value) {
        self.overrides.insert(addr, value);
        self.cache.clear();
    }

    /// Value of a cell. Unknown cells are Blank; unparseable formulas and
    /// circular references are unsupported.
    pub fn value(&mut self, addr: &CellAddress) -> Value {
        if let Some(v) = self.overrides.get(addr) {
            return v.clone();
        }
        if let Some(v) = self.cache.get(addr) {
            return v.clone();
        }
        let Some(cell) = self.wb.cell(addr) else { return Value::Blank };
        let Some(text) = &cell.formula else { return Value::from(&cell.literal) };
        if !self.active.insert(addr.clone()) {
            return Value::Error(ErrorCode::Unsupported);
        }
        let ast = self.parsed.entry(addr.clone()).or_insert_with(|| parse_formula(text).ok()).clone();
        let v = match ast {
            Some(ast) => {
                let mut ctx = CellCtx { ev: self, sheet: addr.sheet.clone() };
                finish(eval(&ast, &mut ctx))
            }
            None => Value::Error(ErrorCode::Unsupported),
        };
        self.active.remove(addr);
        self.cache.insert(addr.clone(), v.clone());
        v
    }

    /// Evaluates an arbitrary formula as if it sat on `sheet`.
    pub fn evaluate_on(&mut self, sheet: &str, ast: &Expr) -> Value {
        let mut ctx = CellCtx { ev: self, sheet: sheet.to_string() };
        finish(eval(ast, &mut ctx))
    }
}

struct CellCtx<'e, 'a> {
    ev: &'e mut WorkbookEvaluator<'a>,
    sheet: String,
}

impl Context for CellCtx<'_, '_> {
    fn cell(&mut self, addr: &CellAddress) -> Value {
        self.ev.value(addr)
    }

    fn locate(&self, r: &CellRef) -> Option<CellAddress> {
        resolve_ref(self.ev.wb, &self.sheet, r).ok()
    }

    fn name(&self, name: &str) -> Option<Resolved> {
        resolve_name(self.ev.wb, &self.sheet, name)
    }
}

/// A rectangular block of values (rows of columns).
pub(crate) type Block = Vec<Vec<Value>>;

fn block<C: Context>(ctx: &mut C, a: &CellAddress, b: &CellAddress) -> Result<Block, ErrorCode> {
    let (lo, hi) = (
        Coord { col: a.col.min(b.col), row: a.row.min(b.row) },
        Coord { col: a.col.max(b.col), row: a.row.max(b.row) },
    );
    if crate::graph::range_size(lo, hi) > RANGE_EXPANSION_CAP {
        return Err(ErrorCode::Unsupported);
    }
    Ok((lo.row..=hi.row)
        .map(|row| {
            (lo.col..=hi.col).map(|col| ctx.cell(&CellAddress::new(a.sheet.clone(), Coord { col, row }))).collect()
        })
        .collect())
}

/// An argument as seen by functions that accept ranges.
pub(crate) enum Arg {
    Scalar(Value),
    /// Values from a reference (single cell or range); such values follow
    /// the "ignore text and blanks" rules of aggregate functions.
    Block(Block),
}

pub(crate) fn eval_arg<C: Context>(e: &Expr, ctx: &mut C) -> Arg {
    match e.unwrap_parens() {
        Expr::Range(a, b) => match (ctx.locate(a), ctx.locate(b)) {
            (Some(a), Some(b)) => match block(ctx, &a, &b) {
                Ok(bl) => Arg::Block(bl),
                Err(code) => Arg::Scalar(Value::Error(code)),
            },
            _ => Arg::Scalar(Value::Error(ErrorCode::Na)),
        },
        Expr::Ref(r) => match ctx.locate(r) {
            Some(a) => Arg::Block(vec![vec![ctx.cell(&a)]]),
            None => Arg::Scalar(Value::Error(ErrorCode::Na)),
        },
        Expr::Name(n) => match ctx.name(n) {
            Some(Resolved::Cell(a)) => Arg::Block(vec![vec![ctx.cell(&a)]]),
            Some(Resolved::Range(a, b)) => match block(ctx, &a, &b) {
                Ok(bl) => Arg::Block(bl),
                Err(code) => Arg::Scalar(Value::Error(code)),
            },
            None => Arg::Scalar(Value::Error(ErrorCode::Na)),
        },
        other => Arg::Scalar(eval(other, ctx)),
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(code) => return Value::Error(code),
        }
    };
}
pub(crate) use tri;

pub(crate) fn eval<C: Context>(e: &Expr, ctx: &mut C) -> Value {
    match e {
        Expr::Number { value, .. } => Value::Number(value.clone()),
        Expr::Text(t) => Value::Text(t.clone()),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Ref(r) => match ctx.locate(r) {
            Some(a) => ctx.cell(&a),
            None => Value::Error(ErrorCode::Na),
        },
        // No implicit intersection: a bare range is not a scalar.
        Expr::Range(..) => Value::Error(ErrorCode::Value),
        Expr::Name(n) => match ctx.name(n) {
            Some(Resolved::Cell(a)) => ctx.cell(&a),
            Some(Resolved::Range(..)) => Value::Error(ErrorCode::Value),
            None => Value::Error(ErrorCode::Na),
        },
        Expr::Paren(inner) => eval(inner, ctx),
        Expr::Neg(inner) => Value::Number(-tri!(eval(inner, ctx).to_number())),
        Expr::Binary { op, left, right } => {
            let l = eval(left, ctx);
            let r = eval(right, ctx);
            binary(*op, l, r)
        }
        Expr::Call { name, args, recognized } => {
            if !recognized {
                return Value::Error(ErrorCode::Unsupported);
            }
            functions::call(name, args, ctx)
        }
    }
}

fn binary(op: crate::formula::BinOp, l: Value, r: Value) -> Value {
    use crate::formula::BinOp::*;
    match op {
        Add | Sub | Mul | Div | Pow => {
            let a = tri!(l.to_number());
            let b = tri!(r.to_number());
            match op {
                Add => Value::Number(a + b),
                Sub => Value::Number(a - b),
                Mul => Value::Number(a * b),
                Div if b.is_zero() => Value::Error(ErrorCode::Div0),
                Div => Value::Number(a / b),
                _ => power(&a, &b),
            }
        }
        Concat => {
            let a = tri!(l.to_text());
            let b = tri!(r.to_text());
            Value::Text(a + &b)
        }
        Eq | Ne | Lt | Gt | Le | Ge => {
            let ord = tri!(compare(&l, &r));
            Value::Bool(match op {
                Eq => ord.is_eq(),
                Ne => ord.is_ne(),
                Lt => ord.is_lt(),
                Gt => ord.is_gt(),
                Le => ord.is_le(),
                _ => ord.is_ge(),
            })
        }
    }
}

/// Exact powers only: the exponent must be an integer of modest size.
fn power(base: &Rational, exp: &Rational) -> Value {
    const MAX_EXPONENT: i32 = 1024;
    if !exp.is_integer() {
        return Value::Error(ErrorCode::Unsupported);
    }
    let Some(e) = exp.to_integer().to_i32().filter(|e| e.abs() <= MAX_EXPONENT) else {
        return Value::Error(ErrorCode::Unsupported);
    };
    if base.is_zero() {
        return match e.signum() {
            1 => Value::num(0),
            0 => Value::Error(ErrorCode::Unsupported),
            _ => Value::Error(ErrorCode::Div0),
        };
    }
    let mut out = num_traits::pow(base.clone(), e.unsigned_abs() as usize);
    if e.is_negative() {
        out = out.recip();
    }
    Value::Number(out)
}

/// Spreadsheet ordering: numbers < text < booleans; text ignores case.
/// Blank takes the type of the other side.
pub(crate) fn compare(l: &Value, r: &Value) -> Result<std::cmp::Ordering, ErrorCode> {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Number(_) | Value::Blank => 0,
            Value::Text(_) => 1,
            _ => 2,
        }
    }
    let blank_as = |v: &Value, other: &Value| match (v, other) {
        (Value::Blank, Value::Text(_)) => Value::Text(String::new()),
        (Value::Blank, Value::Bool(_)) => Value::Bool(false),
        (Value::Blank, _) => Value::num(0),
        (v, _) => v.clone(),
    };
    if let Value::Error(e) = l {
        return Err(*e);
    }
    if let Value::Error(e) = r {
        return Err(*e);
    }
    let (a, b) = (blank_as(l, r), blank_as(r, l));
    Ok(match (&a, &b) {
        (Value::Number(x), Value::Number(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => x.to_lowercase().cmp(&y.to_lowercase()),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        _ => rank(&a).cmp(&rank(&b)),
    })
}
