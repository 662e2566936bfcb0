use num_traits::{Signed, ToPrimitive, Zero};

use super::{compare, eval, eval_arg, tri, Arg, Context, ErrorCode, Value};
use crate::formula::Expr;
use crate::number::{int, round_half_away, Rational};

pub(super) fn call<C: Context>(name: &str, args: &[Expr], ctx: &mut C) -> Value {
    match name {
        "IF" => if_(args, ctx),
        "AND" => connective(args, ctx, true),
        "OR" => connective(args, ctx, false),
        "NOT" => {
            let [x] = args else { return arity() };
            Value::Bool(!tri!(eval(x, ctx).to_bool()))
        }
        "ABS" => {
            let [x] = args else { return arity() };
            Value::Number(tri!(eval(x, ctx).to_number()).abs())
        }
        "ROUND" => round(args, ctx),
        "SUM" => Value::Number(tri!(numbers(args, ctx)).into_iter().sum()),
        "MIN" => Value::Number(tri!(numbers(args, ctx)).into_iter().min().unwrap_or_else(Rational::zero)),
        "MAX" => Value::Number(tri!(numbers(args, ctx)).into_iter().max().unwrap_or_else(Rational::zero)),
        "COUNT" => count(args, ctx, |v| matches!(v, Value::Number(_))),
        "COUNTA" => count(args, ctx, |v| !matches!(v, Value::Blank)),
        "ISBLANK" => {
            let [x] = args else { return arity() };
            match eval_arg(x, ctx) {
                Arg::Block(b) if b.len() == 1 && b[0].len() == 1 => Value::Bool(b[0][0] == Value::Blank),
                Arg::Block(_) => Value::Error(ErrorCode::Value),
                Arg::Scalar(_) => Value::Bool(false),
            }
        }
        "VLOOKUP" => vlookup(args, ctx),
        _ => Value::Error(ErrorCode::Unsupported),
    }
}

fn arity() -> Value {
    Value::Error(ErrorCode::Value)
}

fn if_<C: Context>(args: &[Expr], ctx: &mut C) -> Value {
    if !(2..=3).contains(&args.len()) {
        return arity();
    }
    if tri!(eval(&args[0], ctx).to_bool()) {
        eval(&args[1], ctx)
    } else {
        args.get(2).map_or(Value::Bool(false), |e| eval(e, ctx))
    }
}

/// AND / OR. Referenced text and blanks are skipped; a literal text
/// argument is an error, as is having nothing to test.
fn connective<C: Context>(args: &[Expr], ctx: &mut C, all: bool) -> Value {
    let mut seen = false;
    let mut acc = all;
    for a in args {
        let values = match eval_arg(a, ctx) {
            Arg::Scalar(v) => vec![Ok(tri!(v.to_bool()))],
            Arg::Block(b) => b
                .into_iter()
                .flatten()
                .filter_map(|v| match v {
                    Value::Text(_) | Value::Blank => None,
                    other => Some(other.to_bool()),
                })
                .collect(),
        };
        for v in values {
            let v = tri!(v);
            seen = true;
            acc = if all { acc && v } else { acc || v };
        }
    }
    if seen {
        Value::Bool(acc)
    } else {
        Value::Error(ErrorCode::Value)
    }
}

/// Numbers for SUM/MIN/MAX: referenced cells contribute numbers only;
/// direct arguments are coerced.
fn numbers<C: Context>(args: &[Expr], ctx: &mut C) -> Result<Vec<Rational>, ErrorCode> {
    let mut out = Vec::new();
    for a in args {
        match eval_arg(a, ctx) {
            Arg::Scalar(v) => out.push(v.to_number()?),
            Arg::Block(b) => {
                for v in b.into_iter().flatten() {
                    match v {
                        Value::Number(n) => out.push(n),
                        Value::Error(e) => return Err(e),
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(out)
}

fn count<C: Context>(args: &[Expr], ctx: &mut C, counts: fn(&Value) -> bool) -> Value {
    let mut n = 0i64;
    for a in args {
        match eval_arg(a, ctx) {
            Arg::Scalar(v) => n += i64::from(counts(&v)),
            Arg::Block(b) => n += b.iter().flatten().filter(|v| counts(v)).count() as i64,
        }
    }
    Value::num(n)
}

fn round<C: Context>(args: &[Expr], ctx: &mut C) -> Value {
    let [x, digits] = args else { return arity() };
    let x = tri!(eval(x, ctx).to_number());
    let digits = tri!(eval(digits, ctx).to_number()).trunc().to_integer();
    let Some(digits) = digits.to_i32().filter(|d| d.abs() <= 400) else {
        return Value::Error(ErrorCode::Unsupported);
    };
    if digits >= 0 {
        return Value::Number(round_half_away(&x, digits as u32));
    }
    let scale = num_traits::pow(int(10), digits.unsigned_abs() as usize);
    Value::Number(round_half_away(&(x / &scale), 0) * scale)
}

/// Exact-match VLOOKUP only.
fn vlookup<C: Context>(args: &[Expr], ctx: &mut C) -> Value {
    if !(3..=4).contains(&args.len()) {
        return arity();
    }
    let exact = match args.get(3) {
        Some(e) => !tri!(eval(e, ctx).to_bool()),
        None => false,
    };
    if !exact {
        return Value::Error(ErrorCode::Unsupported);
    }
    let key = eval(&args[0], ctx);
    if let Value::Error(e) = key {
        return Value::Error(e);
    }
    let table = match eval_arg(&args[1], ctx) {
        Arg::Block(b) => b,
        Arg::Scalar(Value::Error(e)) => return Value::Error(e),
        Arg::Scalar(_) => return Value::Error(ErrorCode::Value),
    };
    let col = tri!(eval(&args[2], ctx).to_number()).trunc().to_integer();
    let width = table.first().map_or(0, Vec::len);
    let Some(col) = col.to_usize().filter(|c| (1..=width).contains(c)) else {
        return Value::Error(ErrorCode::Value);
    };
    for row in &table {
        let probe = &row[0];
        let same_type = matches!(
            (&key, probe),
            (Value::Number(_), Value::Number(_)) | (Value::Text(_), Value::Text(_)) | (Value::Bool(_), Value::Bool(_))
        );
        if same_type && compare(&key, probe).is_ok_and(|o| o.is_eq()) {
            return row[col - 1].clone();
        }
    }
    Value::Error(ErrorCode::Na)
}

#[cfg(test)]
mod tests {
    use crate::eval::{evaluate, Env, ErrorCode, Value};
    use crate::formula::parse_formula;
    use crate::number::ratio;

    fn run(text: &str, env: &Env) -> Value {
        evaluate(&parse_formula(text).unwrap(), env)
    }

    fn table() -> Env {
        Env::new("S")
            .with("D2", Value::Text("atropine".into()))
            .with("E2", Value::Number(ratio(2, 100)))
            .with("D3", Value::Text("midazolam".into()))
            .with("E3", Value::Number(ratio(5, 100)))
            .with("D4", Value::num(7))
            .with("E4", Value::Text("seven".into()))
    }

    #[test]
    fn vlookup_exact_only() {
        let env = table().with("A1", Value::Text("Midazolam".into()));
        assert_eq!(run("=VLOOKUP(A1,D2:E10,2,FALSE)", &env), Value::Number(ratio(1, 20)));
        assert_eq!(run("=VLOOKUP(7,D2:E10,2,0)", &env), Value::Text("seven".into()));
        assert_eq!(run("=VLOOKUP(\"x\",D2:E10,2,FALSE)", &env), Value::Error(ErrorCode::Na));
        assert_eq!(run("=VLOOKUP(A1,D2:E10,2)", &env), Value::Error(ErrorCode::Unsupported));
        assert_eq!(run("=VLOOKUP(A1,D2:E10,2,TRUE)", &env), Value::Error(ErrorCode::Unsupported));
        assert_eq!(run("=VLOOKUP(A1,D2:E10,3,FALSE)", &env), Value::Error(ErrorCode::Value));
    }

    #[test]
    fn aggregates_skip_text_in_ranges() {
        let env = table();
        assert_eq!(run("=SUM(E2:E4)", &env), Value::Number(ratio(7, 100)));
        assert_eq!(run("=MAX(E2:E4,0.01)", &env), Value::Number(ratio(1, 20)));
        assert_eq!(run("=MIN(E2:E3)", &env), Value::Number(ratio(1, 50)));
        assert_eq!(run("=COUNT(D2:E5)", &env), Value::num(3));
        assert_eq!(run("=COUNTA(D2:E5)", &env), Value::num(6));
        assert_eq!(run("=SUM(\"x\")", &env), Value::Error(ErrorCode::Value));
        assert_eq!(run("=MAX(Z1:Z3)", &env), Value::num(0));
    }

    #[test]
    fn logic() {
        let env = table();
        assert_eq!(run("=AND(1,TRUE,E2>0)", &env), Value::Bool(true));
        assert_eq!(run("=OR(0,FALSE)", &env), Value::Bool(false));
        assert_eq!(run("=AND(Z1:Z2)", &env), Value::Error(ErrorCode::Value));
        assert_eq!(run("=NOT(ISBLANK(Z1))", &env), Value::Bool(false));
        assert_eq!(run("=ISBLANK(D2)", &env), Value::Bool(false));
        assert_eq!(run("=ISBLANK(\"\")", &env), Value::Bool(false));
        assert_eq!(run("=IF(1)", &env), Value::Error(ErrorCode::Value));
    }

    #[test]
    fn rounding() {
        let env = Env::new("S");
        assert_eq!(run("=ROUND(2.345,2)", &env), Value::Number(ratio(235, 100)));
        assert_eq!(run("=ROUND(-2.5,0)", &env), Value::num(-3));
        assert_eq!(run("=ROUND(1250,-2)", &env), Value::num(1300));
        assert_eq!(run("=ABS(-0.5)", &env), Value::Number(ratio(1, 2)));
    }
}
