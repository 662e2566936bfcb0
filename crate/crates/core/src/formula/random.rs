//! Seeded random formula trees, used to exercise the printer/parser pair.

use rand::Rng;

use super::ast::{BinOp, CellRef, Expr};
use crate::address::Coord;
use crate::number::parse_decimal;

const SHEETS: &[&str] = &["Data", "Dose Calc", "Tom's", "S2"];
const NAMES: &[&str] = &["Bodyweight", "Rate_1", "dose.max", "_lim"];
const FUNCTIONS: &[&str] = &["IF", "AND", "OR", "NOT", "MIN", "MAX", "SUM", "ROUND", "VLOOKUP", "FROB", "LOG10"];
const TEXTS: &[&str] = &["", "mg", "say \"hi\"", "a,b", "µg/kg"];

fn random_number<R: Rng>(rng: &mut R) -> Expr {
    let text = match rng.random_range(0..4) {
        0 => rng.random_range(0..1000u32).to_string(),
        1 => format!("{}.{:02}", rng.random_range(0..10u32), rng.random_range(0..100u32)),
        2 => format!("0.{:03}", rng.random_range(0..1000u32)),
        _ => format!("{}E-{}", rng.random_range(1..10u32), rng.random_range(1..4u32)),
    };
    let value = parse_decimal(&text).expect("generated decimal");
    Expr::Number { value, text }
}

fn random_coord<R: Rng>(rng: &mut R) -> Coord {
    Coord::new(rng.random_range(1..=800), rng.random_range(1..=5000)).expect("in bounds")
}

fn random_sheet<R: Rng>(rng: &mut R) -> Option<String> {
    rng.random_bool(0.25).then(|| SHEETS[rng.random_range(0..SHEETS.len())].to_string())
}

fn random_leaf<R: Rng>(rng: &mut R) -> Expr {
    match rng.random_range(0..7) {
        0 | 1 => random_number(rng),
        2 => Expr::Text(TEXTS[rng.random_range(0..TEXTS.len())].to_string()),
        3 => Expr::Bool(rng.random_bool(0.5)),
        4 => Expr::Ref(CellRef { sheet: random_sheet(rng), coord: random_coord(rng) }),
        5 => {
            let sheet = random_sheet(rng);
            Expr::Range(
                CellRef { sheet: sheet.clone(), coord: random_coord(rng) },
                CellRef { sheet, coord: random_coord(rng) },
            )
        }
        _ => Expr::Name(NAMES[rng.random_range(0..NAMES.len())].to_string()),
    }
}

/// A random expression no deeper than `max_depth` (a lone leaf has depth 1).
pub fn random_ast<R: Rng>(rng: &mut R, max_depth: u32) -> Expr {
    if max_depth <= 1 || rng.random_bool(0.2) {
        return random_leaf(rng);
    }
    let depth = max_depth - 1;
    match rng.random_range(0..10) {
        0..=4 => {
            let op = BinOp::ALL[rng.random_range(0..BinOp::ALL.len())];
            Expr::binary(op, random_ast(rng, depth), random_ast(rng, depth))
        }
        5 | 6 => {
            let name = FUNCTIONS[rng.random_range(0..FUNCTIONS.len())];
            let argc = rng.random_range(0..=3);
            Expr::call(name, (0..argc).map(|_| random_ast(rng, depth)).collect())
        }
        7 | 8 => Expr::Neg(Box::new(random_ast(rng, depth))),
        _ => Expr::Paren(Box::new(random_ast(rng, depth))),
    }
}

/// Depth of a tree: a leaf counts 1.
pub fn depth(e: &Expr) -> u32 {
    1 + e.children().into_iter().map(depth).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_trees_respect_depth_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2_000 {
            let ast = random_ast(&mut rng, 6);
            assert!(depth(&ast) <= 6);
            let text = ast.unparse();
            let back = parse_formula(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(back.strip_parens(), ast.strip_parens(), "{text}");
            assert_eq!(back.unparse(), text);
        }
    }
}
