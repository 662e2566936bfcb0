use num_traits::Zero;

use crate::formula::{BinOp, CellRef, Expr};
use crate::number::{to_exact_string, Rational};

/// `IF(x*s>max, max, IF(x*s<min, min, x*s))`, the bounded per-kilogram dose
/// idiom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClampForm {
    pub input: CellRef,
    pub scale: Rational,
    pub min: Rational,
    pub max: Rational,
}

impl ClampForm {
    /// Canonical formula text for this clamp. The constants must have
    /// terminating decimal expansions to be written as literals.
    pub fn to_formula(&self) -> String {
        let p = format!("{}*{}", self.input, to_exact_string(&self.scale));
        let (min, max) = (to_exact_string(&self.min), to_exact_string(&self.max));
        format!("=IF({p}>{max},{max},IF({p}<{min},{min},{p}))")
    }

    /// The value the formula takes for input `w`.
    pub fn apply(&self, w: &Rational) -> Rational {
        clamp(&(w * &self.scale), &self.min, &self.max)
    }
}

/// `x` limited to `[min, max]`.
pub fn clamp(x: &Rational, min: &Rational, max: &Rational) -> Rational {
    if x > max {
        max.clone()
    } else if x < min {
        min.clone()
    } else {
        x.clone()
    }
}

fn literal(e: &Expr) -> Option<&Rational> {
    match e.unwrap_parens() {
        Expr::Number { value, .. } => Some(value),
        _ => None,
    }
}

/// `x*s` or `s*x`.
fn product(e: &Expr) -> Option<(&CellRef, &Rational)> {
    let Expr::Binary { op: BinOp::Mul, left, right } = e.unwrap_parens() else { return None };
    match (left.unwrap_parens(), right.unwrap_parens()) {
        (Expr::Ref(r), other) | (other, Expr::Ref(r)) => literal(other).map(|s| (r, s)),
        _ => None,
    }
}

/// Matches `a OP b` or the mirrored `b OP' a`, returning (product side,
/// bound side) where OP is `greater` oriented as `product OP bound`.
fn comparison(e: &Expr, greater: bool) -> Option<(&Expr, &Expr)> {
    let Expr::Binary { op, left, right } = e.unwrap_parens() else { return None };
    let (fwd, back) = if greater { (BinOp::Gt, BinOp::Lt) } else { (BinOp::Lt, BinOp::Gt) };
    if *op == fwd {
        Some((left, right))
    } else if *op == back {
        Some((right, left))
    } else {
        None
    }
}

fn if_args(e: &Expr) -> Option<&[Expr]> {
    match e.unwrap_parens() {
        Expr::Call { name, args, .. } if name == "IF" && args.len() == 3 => Some(args),
        _ => None,
    }
}

/// Recognizes the clamp idiom, allowing either operand order in the
/// products and comparisons. Requires `0 < min <= max` and a positive scale.
pub fn as_clamp(ast: &Expr) -> Option<ClampForm> {
    let outer = if_args(ast)?;
    let inner = if_args(&outer[2])?;

    let (p1, max_cmp) = comparison(&outer[0], true)?;
    let max = literal(max_cmp)?;
    if literal(&outer[1])? != max {
        return None;
    }
    let (p2, min_cmp) = comparison(&inner[0], false)?;
    let min = literal(min_cmp)?;
    if literal(&inner[1])? != min {
        return None;
    }
    let (x, s) = product(p1)?;
    for p in [p2, &inner[2]] {
        if product(p)? != (x, s) {
            return None;
        }
    }
    if !(s > &Rational::zero() && min > &Rational::zero() && min <= max) {
        return None;
    }
    Some(ClampForm { input: x.clone(), scale: s.clone(), min: min.clone(), max: max.clone() })
}
