use std::collections::BTreeSet;

use super::ast::{CellRef, Expr};
use crate::number::{int, Rational};

/// Structural complexity counts for one formula.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormulaMetrics {
    /// Most IF calls on any root-to-leaf path.
    pub if_depth: usize,
    /// AND/OR calls.
    pub connective_count: usize,
    pub comparison_count: usize,
    /// Number literals whose value is not whitelisted.
    pub literal_count: usize,
    /// Every referenced cell, including both corners of ranges.
    pub ref_set: BTreeSet<CellRef>,
}

/// The default whitelist of constants not counted as embedded: {0, 1}.
pub fn default_whitelist() -> Vec<Rational> {
    vec![int(0), int(1)]
}

pub fn metrics(ast: &Expr, whitelist: &[Rational]) -> FormulaMetrics {
    let mut m = FormulaMetrics { if_depth: if_depth(ast), ..Default::default() };
    ast.walk(&mut |e| match e {
        Expr::Call { name, .. } if name == "AND" || name == "OR" => m.connective_count += 1,
        Expr::Binary { op, .. } if op.is_comparison() => m.comparison_count += 1,
        Expr::Number { value, .. } if !whitelist.contains(value) => m.literal_count += 1,
        Expr::Ref(r) => {
            m.ref_set.insert(r.clone());
        }
        Expr::Range(a, b) => {
            m.ref_set.insert(a.clone());
            m.ref_set.insert(b.clone());
        }
        _ => {}
    });
    m
}

fn if_depth(e: &Expr) -> usize {
    let here = usize::from(matches!(e, Expr::Call { name, .. } if name == "IF"));
    here + e.children().into_iter().map(if_depth).max().unwrap_or(0)
}
