//! Formula lexing, parsing, canonical printing and structural metrics.

mod ast;
pub mod lexer;
mod metrics;
mod parser;
pub mod random;

pub use ast::{is_known_function, BinOp, CellRef, Expr, FormulaAst, KNOWN_FUNCTIONS};
pub use lexer::{shift_references, tokenize, LexError};
pub use metrics::{default_whitelist, metrics, FormulaMetrics};
pub use parser::{parse_formula, ParseError, SyntaxError};

/// Canonical form of formula text (`=` prefixed), or `None` if it does not
/// parse.
pub fn canonicalize(text: &str) -> Option<String> {
    parse_formula(text).ok().map(|ast| ast.to_formula())
}
