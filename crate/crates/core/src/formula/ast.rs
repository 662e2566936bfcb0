use std::fmt;

use crate::address::{quote_sheet_name, CellAddress, Coord};
use crate::number::Rational;

/// Functions the evaluator implements. Anything else parses but is marked
/// unrecognized.
pub const KNOWN_FUNCTIONS: &[&str] =
    &["ABS", "AND", "COUNT", "COUNTA", "IF", "ISBLANK", "MAX", "MIN", "NOT", "OR", "ROUND", "SUM", "VLOOKUP"];

pub fn is_known_function(name: &str) -> bool {
    KNOWN_FUNCTIONS.contains(&name)
}

/// A reference as written in a formula; the sheet is optional (unqualified
/// references resolve against the formula's own sheet).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRef {
    pub sheet: Option<String>,
    pub coord: Coord,
}

impl CellRef {
    pub fn local(coord: Coord) -> Self {
        CellRef { sheet: None, coord }
    }

    pub fn resolve(&self, default_sheet: &str) -> CellAddress {
        let sheet = self.sheet.as_deref().unwrap_or(default_sheet);
        CellAddress::new(sheet, self.coord)
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(sheet) = &self.sheet {
            write!(f, "{}!", quote_sheet_name(sheet))?;
        }
        write!(f, "{}", self.coord)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl BinOp {
    pub const ALL: [BinOp; 12] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Pow,
        BinOp::Concat,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Le,
        BinOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Concat => "&",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge)
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn level(self) -> u8 {
        match self {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => LEVEL_CMP,
            BinOp::Concat => LEVEL_CONCAT,
            BinOp::Add | BinOp::Sub => LEVEL_ADD,
            BinOp::Mul | BinOp::Div => LEVEL_MUL,
            BinOp::Pow => LEVEL_POW,
        }
    }
}

pub(crate) const LEVEL_CMP: u8 = 1;
pub(crate) const LEVEL_CONCAT: u8 = 2;
pub(crate) const LEVEL_ADD: u8 = 3;
pub(crate) const LEVEL_MUL: u8 = 4;
pub(crate) const LEVEL_NEG: u8 = 5;
pub(crate) const LEVEL_POW: u8 = 6;
pub(crate) const LEVEL_ATOM: u8 = 7;

/// Parsed formula.
///
/// Operator precedence, loosest first: comparisons, `&`, `+ -`, `* /`,
/// unary `-`, `^`. All binary operators associate left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Exact value plus the literal as written (e.g. `0.020`, `1E-3`).
    Number {
        value: Rational,
        text: String,
    },
    Text(String),
    Bool(bool),
    Ref(CellRef),
    Range(CellRef, CellRef),
    Name(String),
    Call {
        name: String,
        args: Vec<Expr>,
        recognized: bool,
    },
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Neg(Box<Expr>),
    Paren(Box<Expr>),
}

pub type FormulaAst = Expr;

impl Expr {
    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        let name = name.to_ascii_uppercase();
        let recognized = is_known_function(&name);
        Expr::Call { name, args, recognized }
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn number(value: Rational) -> Expr {
        let text = crate::number::to_exact_string(&value);
        Expr::Number { value, text }
    }

    /// The expression with every `Paren` wrapper removed.
    pub fn strip_parens(&self) -> Expr {
        match self {
            Expr::Paren(inner) => inner.strip_parens(),
            Expr::Call { name, args, recognized } => Expr::Call {
                name: name.clone(),
                args: args.iter().map(Expr::strip_parens).collect(),
                recognized: *recognized,
            },
            Expr::Binary { op, left, right } => Expr::binary(*op, left.strip_parens(), right.strip_parens()),
            Expr::Neg(inner) => Expr::Neg(Box::new(inner.strip_parens())),
            other => other.clone(),
        }
    }

    /// Peels off any number of enclosing `Paren` nodes.
    pub fn unwrap_parens(&self) -> &Expr {
        let mut e = self;
        while let Expr::Paren(inner) = e {
            e = inner;
        }
        e
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Call { args, .. } => args.iter().collect(),
            Expr::Binary { left, right, .. } => vec![left, right],
            Expr::Neg(inner) | Expr::Paren(inner) => vec![inner],
            _ => Vec::new(),
        }
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    /// Numeric literals in source order as `(value, source text)`.
    pub fn number_literals(&self) -> Vec<(&Rational, &str)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Number { value, text } = e {
                out.push((value, text.as_str()));
            }
        });
        out
    }

    /// Mutable access to the `index`-th numeric literal (pre-order).
    pub fn number_literal_mut(&mut self, index: usize) -> Option<&mut Expr> {
        fn go<'a>(e: &'a mut Expr, index: usize, seen: &mut usize) -> Option<&'a mut Expr> {
            if matches!(e, Expr::Number { .. }) {
                if *seen == index {
                    return Some(e);
                }
                *seen += 1;
                return None;
            }
            match e {
                Expr::Call { args, .. } => args.iter_mut().find_map(|a| go(a, index, seen)),
                Expr::Binary { left, right, .. } => go(left, index, seen).or_else(|| go(right, index, seen)),
                Expr::Neg(inner) | Expr::Paren(inner) => go(inner, index, seen),
                _ => None,
            }
        }
        go(self, index, &mut 0)
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.level(),
            Expr::Neg(_) => LEVEL_NEG,
            _ => LEVEL_ATOM,
        }
    }

    /// Canonical text without the leading `=`: upper-case function names, no
    /// whitespace, and parentheses only where written or required.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        write_expr(self, LEVEL_CMP, &mut out);
        out
    }

    /// Canonical text with the leading `=`.
    pub fn to_formula(&self) -> String {
        format!("={}", self.unparse())
    }
}

fn write_text_literal(s: &str, out: &mut String) {
    out.push('"');
    out.push_str(&s.replace('"', "\"\""));
    out.push('"');
}

/// Writes the right operand of `^`, which may be a chain of unary minus over
/// an atom.
fn write_pow_operand(e: &Expr, out: &mut String) {
    match e {
        Expr::Neg(inner) => {
            out.push('-');
            write_pow_operand(inner, out);
        }
        other => write_expr(other, LEVEL_ATOM, out),
    }
}

fn write_expr(e: &Expr, min_level: u8, out: &mut String) {
    if e.level() < min_level {
        out.push('(');
        write_expr(e, LEVEL_CMP, out);
        out.push(')');
        return;
    }
    match e {
        Expr::Number { text, .. } => out.push_str(text),
        Expr::Text(s) => write_text_literal(s, out),
        Expr::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Expr::Ref(r) => out.push_str(&r.to_string()),
        Expr::Range(a, b) => {
            out.push_str(&a.to_string());
            out.push(':');
            // The end inherits the start's sheet.
            if b.sheet.is_some() && b.sheet != a.sheet {
                out.push_str(&b.to_string());
            } else {
                out.push_str(&b.coord.to_string());
            }
        }
        Expr::Name(n) => out.push_str(n),
        Expr::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_expr(arg, LEVEL_CMP, out);
            }
            out.push(')');
        }
        Expr::Binary { op: BinOp::Pow, left, right } => {
            write_expr(left, LEVEL_POW, out);
            out.push('^');
            write_pow_operand(right, out);
        }
        Expr::Binary { op, left, right } => {
            let level = op.level();
            write_expr(left, level, out);
            out.push_str(op.symbol());
            write_expr(right, level + 1, out);
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(inner, LEVEL_NEG, out);
        }
        Expr::Paren(inner) => {
            out.push('(');
            write_expr(inner, LEVEL_CMP, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_formula())
    }
}
