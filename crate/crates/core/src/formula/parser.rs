use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, CellRef, Expr};
use super::lexer::{tokenize, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("lex error: {0}")]
    Lex(#[from] LexError),
    #[error("{0}")]
    Syntax(SyntaxError),
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Lex(e) => e.position(),
            ParseError::Syntax(e) => e.position,
        }
    }
}

/// Unexpected token (or end of input) with the set of tokens that would have
/// been accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub position: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: found {}, expected one of: {}", self.position, self.found, self.expected.join(", "))
    }
}

const EXPECT_OPERAND: &[&str] = &["number", "string", "reference", "name", "function call", "(", "-"];
const EXPECT_OPERATOR: &[&str] = &["operator", "end of formula"];

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        let (position, found) = match self.tokens.get(self.pos) {
            Some(t) => (t.start, describe(&t.kind)),
            None => (self.src.len(), "end of formula".to_string()),
        };
        ParseError::Syntax(SyntaxError { position, found, expected: expected.to_vec() })
    }

    fn expect(&mut self, kind: TokenKind, label: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&[label]))
        }
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.concat()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Eq) => BinOp::Eq,
                Some(TokenKind::Ne) => BinOp::Ne,
                Some(TokenKind::Lt) => BinOp::Lt,
                Some(TokenKind::Gt) => BinOp::Gt,
                Some(TokenKind::Le) => BinOp::Le,
                Some(TokenKind::Ge) => BinOp::Ge,
                _ => return Ok(left),
            };
            self.pos += 1;
            left = Expr::binary(op, left, self.concat()?);
        }
    }

    fn concat(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.additive()?;
        while self.peek() == Some(&TokenKind::Amp) {
            self.pos += 1;
            left = Expr::binary(BinOp::Concat, left, self.additive()?);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(left),
            };
            self.pos += 1;
            left = Expr::binary(op, left, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(left),
            };
            self.pos += 1;
            left = Expr::binary(op, left, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(TokenKind::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            // Unary plus is accepted and dropped.
            Some(TokenKind::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.primary()?;
        while self.peek() == Some(&TokenKind::Caret) {
            self.pos += 1;
            left = Expr::binary(BinOp::Pow, left, self.power_operand()?);
        }
        Ok(left)
    }

    fn power_operand(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(TokenKind::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.power_operand()?)))
            }
            Some(TokenKind::Plus) => {
                self.pos += 1;
                self.power_operand()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error(EXPECT_OPERAND));
        };
        match tok.kind {
            TokenKind::Number(value) => {
                self.pos += 1;
                let text = self.src[tok.start..tok.end].to_string();
                Ok(Expr::Number { value, text })
            }
            TokenKind::Text(s) => {
                self.pos += 1;
                Ok(Expr::Text(s))
            }
            TokenKind::Ref(start) => {
                self.pos += 1;
                let start_ref = CellRef { sheet: start.sheet.clone(), coord: start.coord() };
                if self.peek() != Some(&TokenKind::Colon) {
                    return Ok(Expr::Ref(start_ref));
                }
                self.pos += 1;
                match self.tokens.get(self.pos).cloned() {
                    Some(Token { kind: TokenKind::Ref(end), start: end_pos, .. }) => {
                        self.pos += 1;
                        if end.sheet.is_some() && end.sheet != start.sheet {
                            return Err(ParseError::Syntax(SyntaxError {
                                position: end_pos,
                                found: "reference on another sheet".into(),
                                expected: vec!["reference on the same sheet"],
                            }));
                        }
                        let end_ref = CellRef { sheet: start.sheet, coord: end.coord() };
                        Ok(Expr::Range(start_ref, end_ref))
                    }
                    _ => Err(self.error(&["reference"])),
                }
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if self.peek() == Some(&TokenKind::LParen) {
                    self.pos += 1;
                    let args = self.arguments()?;
                    return Ok(Expr::call(&name, args));
                }
                if name.eq_ignore_ascii_case("TRUE") {
                    Ok(Expr::Bool(true))
                } else if name.eq_ignore_ascii_case("FALSE") {
                    Ok(Expr::Bool(false))
                } else {
                    Ok(Expr::Name(name))
                }
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.comparison()?;
                self.expect(TokenKind::RParen, ")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            _ => Err(self.error(EXPECT_OPERAND)),
        }
    }

    /// Arguments after `(`, consuming the closing `)`.
    fn arguments(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek() == Some(&TokenKind::RParen) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.comparison()?);
            match self.peek() {
                Some(TokenKind::Comma) => self.pos += 1,
                Some(TokenKind::RParen) => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return Err(self.error(&[",", ")"])),
            }
        }
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Number(_) => "number".into(),
        TokenKind::Text(_) => "string".into(),
        TokenKind::Ident(n) => format!("name {n:?}"),
        TokenKind::Ref(_) => "reference".into(),
        TokenKind::Colon => "\":\"".into(),
        TokenKind::Comma => "\",\"".into(),
        TokenKind::LParen => "\"(\"".into(),
        TokenKind::RParen => "\")\"".into(),
        other => format!("operator {other:?}"),
    }
}

/// Parses formula text (with or without a leading `=`).
pub fn parse_formula(text: &str) -> Result<Expr, ParseError> {
    let body = super::lexer::strip_equals(text);
    let tokens = tokenize(body)?;
    let mut parser = Parser { tokens, pos: 0, src: body };
    let expr = parser.comparison()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.error(EXPECT_OPERATOR));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::parse_a1;
    use crate::number::ratio;

    fn r(a1: &str) -> Expr {
        Expr::Ref(CellRef::local(parse_a1(a1).unwrap()))
    }

    fn num(text: &str) -> Expr {
        Expr::Number { value: crate::number::parse_decimal(text).unwrap(), text: text.into() }
    }

    const ATROPINE: &str = "=IF(E19*0.02>0.6,0.6,IF(E19*0.02<0.1,0.1,E19*0.02))";

    #[test]
    fn atropine_structure() {
        let ast = parse_formula(ATROPINE).unwrap();
        let Expr::Call { name, args, recognized } = &ast else { panic!("{ast:?}") };
        assert_eq!(name, "IF");
        assert!(recognized);
        assert_eq!(args.len(), 3);
        assert_eq!(args[0], Expr::binary(BinOp::Gt, Expr::binary(BinOp::Mul, r("E19"), num("0.02")), num("0.6")));
        assert!(matches!(&args[2], Expr::Call { name, args, .. } if name == "IF" && args.len() == 3));
        assert_eq!(ast.to_formula(), ATROPINE);
    }

    #[test]
    fn literals() {
        assert_eq!(parse_formula("=0").unwrap(), num("0"));
        assert_eq!(parse_formula("=\"mg\"").unwrap(), Expr::Text("mg".into()));
        assert_eq!(parse_formula("=true").unwrap(), Expr::Bool(true));
        let n = parse_formula("0.020").unwrap();
        assert_eq!(n, Expr::Number { value: ratio(1, 50), text: "0.020".into() });
    }

    #[test]
    fn vlookup_with_range() {
        let ast = parse_formula("=VLOOKUP(A1,D2:E10,2,FALSE)").unwrap();
        let Expr::Call { name, args, .. } = &ast else { panic!() };
        assert_eq!(name, "VLOOKUP");
        assert_eq!(args.len(), 4);
        assert_eq!(
            args[1],
            Expr::Range(CellRef::local(parse_a1("D2").unwrap()), CellRef::local(parse_a1("E10").unwrap()))
        );
        assert_eq!(args[3], Expr::Bool(false));
        assert_eq!(parse_formula(&ast.unparse()).unwrap(), ast);
    }

    #[test]
    fn precedence() {
        // ^ binds tighter than unary minus.
        assert_eq!(parse_formula("-2^2").unwrap(), Expr::Neg(Box::new(Expr::binary(BinOp::Pow, num("2"), num("2")))));
        assert_eq!(
            parse_formula("1+2*3").unwrap(),
            Expr::binary(BinOp::Add, num("1"), Expr::binary(BinOp::Mul, num("2"), num("3")))
        );
        assert_eq!(
            parse_formula("1-2-3").unwrap(),
            Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, num("1"), num("2")), num("3"))
        );
        assert_eq!(
            parse_formula("2^3^2").unwrap(),
            Expr::binary(BinOp::Pow, Expr::binary(BinOp::Pow, num("2"), num("3")), num("2"))
        );
        assert_eq!(
            parse_formula("A1&B1=C1").unwrap(),
            Expr::binary(BinOp::Eq, Expr::binary(BinOp::Concat, r("A1"), r("B1")), r("C1"))
        );
        assert_eq!(parse_formula("2^-1").unwrap(), Expr::binary(BinOp::Pow, num("2"), Expr::Neg(Box::new(num("1")))));
        assert_eq!(parse_formula("+A1").unwrap(), r("A1"));
    }

    #[test]
    fn functions_are_upper_cased() {
        let ast = parse_formula("=max(a1, 2)").unwrap();
        assert_eq!(ast.to_formula(), "=MAX(A1,2)");
        let unknown = parse_formula("=FROB(1)").unwrap();
        assert!(matches!(unknown, Expr::Call { recognized: false, .. }));
        assert!(matches!(parse_formula("=PI()").unwrap(), Expr::Call { ref args, .. } if args.is_empty()));
    }

    #[test]
    fn sheet_qualified_ranges() {
        let ast = parse_formula("=SUM('Dose Data'!B2:B8)").unwrap();
        assert_eq!(ast.unparse(), "SUM('Dose Data'!B2:B8)");
        let Expr::Call { args, .. } = &ast else { panic!() };
        let Expr::Range(a, b) = &args[0] else { panic!() };
        assert_eq!(a.sheet.as_deref(), Some("Dose Data"));
        assert_eq!(b.sheet.as_deref(), Some("Dose Data"));
        assert!(parse_formula("=SUM(A!B2:C!B8)").is_err());
    }

    #[test]
    fn syntax_errors_report_position_and_expectations() {
        let ParseError::Syntax(e) = parse_formula("=IF(A1,1").unwrap_err() else { panic!() };
        // offsets count from just after the leading `=`
        assert_eq!(e.position, 7);
        assert_eq!(e.expected, vec![",", ")"]);
        let ParseError::Syntax(e) = parse_formula("=1+").unwrap_err() else { panic!() };
        assert_eq!(e.found, "end of formula");
        assert!(e.expected.contains(&"number"));
        let ParseError::Syntax(e) = parse_formula("=1 2").unwrap_err() else { panic!() };
        assert_eq!(e.position, 2);
        assert!(matches!(parse_formula("=1+@"), Err(ParseError::Lex(_))));
        assert!(parse_formula("=").is_err());
        assert!(parse_formula("=A1:").is_err());
        assert!(parse_formula("=(1").is_err());
    }

    #[test]
    fn redundant_parens_survive_and_required_ones_are_added() {
        assert_eq!(parse_formula("=(A1)+((2))").unwrap().unparse(), "(A1)+((2))");
        let built = Expr::binary(BinOp::Mul, Expr::binary(BinOp::Add, r("A1"), num("1")), num("2"));
        assert_eq!(built.unparse(), "(A1+1)*2");
        let neg_pow = Expr::binary(BinOp::Pow, Expr::Neg(Box::new(r("A1"))), num("2"));
        assert_eq!(neg_pow.unparse(), "(-A1)^2");
        let right_sub = Expr::binary(BinOp::Sub, num("1"), Expr::binary(BinOp::Sub, num("2"), num("3")));
        assert_eq!(right_sub.unparse(), "1-(2-3)");
    }
}
