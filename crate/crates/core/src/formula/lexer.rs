//! Formula tokenizer. Total: every input yields tokens or a positioned error.

use thiserror::Error;

use crate::address::{column_number, Coord, MAX_ROW};
use crate::number::{parse_decimal, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unexpected character {ch:?} at {position}")]
    BadChar { position: usize, ch: char },
    #[error("unterminated string starting at {position}")]
    UnterminatedString { position: usize },
    #[error("unterminated sheet name starting at {position}")]
    UnterminatedSheetName { position: usize },
    #[error("malformed number at {position}")]
    BadNumber { position: usize },
    #[error("sheet prefix at {position} is not followed by a cell reference")]
    DanglingSheet { position: usize },
}

impl LexError {
    pub fn position(&self) -> usize {
        match self {
            LexError::BadChar { position, .. }
            | LexError::UnterminatedString { position }
            | LexError::UnterminatedSheetName { position }
            | LexError::BadNumber { position }
            | LexError::DanglingSheet { position } => *position,
        }
    }
}

/// A cell reference as written, keeping `$` markers so shared formulas can be
/// shifted. The AST drops them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefToken {
    pub sheet: Option<String>,
    pub col_abs: bool,
    pub col: u32,
    pub row_abs: bool,
    pub row: u32,
}

impl RefToken {
    pub fn coord(&self) -> Coord {
        Coord { col: self.col, row: self.row }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Number(Rational),
    Text(String),
    Ident(String),
    Ref(RefToken),
    Colon,
    Comma,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Amp,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offsets into the source (after any leading `=`).
    pub start: usize,
    pub end: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '\\'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\\'
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src.get(self.pos + offset..).and_then(|s| s.chars().next())
    }

    /// Tries to read `$?COL$?ROW` at `at`, returning the token and end offset.
    /// The match must not be followed by an identifier character or `(`.
    fn try_cell_ref(&self, at: usize) -> Option<(RefToken, usize)> {
        let bytes = self.src.as_bytes();
        let mut i = at;
        let col_abs = bytes.get(i) == Some(&b'$');
        if col_abs {
            i += 1;
        }
        let letters_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let letters = &self.src[letters_start..i];
        let row_abs = bytes.get(i) == Some(&b'$');
        if row_abs {
            i += 1;
        }
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let digits = &self.src[digits_start..i];
        if letters.is_empty() || digits.is_empty() || digits.starts_with('0') {
            return None;
        }
        if let Some(next) = self.src[i..].chars().next() {
            if is_ident_char(next) || next == '(' || next == '$' {
                return None;
            }
        }
        let col = column_number(letters)?;
        let row: u32 = digits.parse().ok()?;
        if row > MAX_ROW {
            return None;
        }
        Some((RefToken { sheet: None, col_abs, col, row_abs, row }, i))
    }

    fn lex_number(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            let digits_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == digits_start {
                return Err(LexError::BadNumber { position: start });
            }
            i = j;
        }
        if let Some(next) = self.src[i..].chars().next() {
            if is_ident_char(next) {
                return Err(LexError::BadNumber { position: start });
            }
        }
        let text = &self.src[start..i];
        let value = parse_decimal(text).ok_or(LexError::BadNumber { position: start })?;
        self.pos = i;
        Ok(Token { kind: TokenKind::Number(value), start, end: i })
    }

    fn lex_string(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        let mut out = String::new();
        let mut chars = self.src[start + 1..].char_indices();
        while let Some((off, c)) = chars.next() {
            if c == '"' {
                if self.src[start + 1 + off + 1..].starts_with('"') {
                    out.push('"');
                    chars.next();
                    continue;
                }
                let end = start + 1 + off + 1;
                self.pos = end;
                return Ok(Token { kind: TokenKind::Text(out), start, end });
            }
            out.push(c);
        }
        Err(LexError::UnterminatedString { position: start })
    }

    /// `'Sheet name'!A1`
    fn lex_quoted_sheet_ref(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        let mut name = String::new();
        let mut chars = self.src[start + 1..].char_indices();
        let mut close = None;
        while let Some((off, c)) = chars.next() {
            if c == '\'' {
                if self.src[start + 1 + off + 1..].starts_with('\'') {
                    name.push('\'');
                    chars.next();
                    continue;
                }
                close = Some(start + 1 + off + 1);
                break;
            }
            name.push(c);
        }
        let after = close.ok_or(LexError::UnterminatedSheetName { position: start })?;
        if !self.src[after..].starts_with('!') || name.is_empty() {
            return Err(LexError::DanglingSheet { position: start });
        }
        let (mut r, end) = self.try_cell_ref(after + 1).ok_or(LexError::DanglingSheet { position: start })?;
        r.sheet = Some(name);
        self.pos = end;
        Ok(Token { kind: TokenKind::Ref(r), start, end })
    }

    fn lex_word(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        if let Some((r, end)) = self.try_cell_ref(start) {
            self.pos = end;
            return Ok(Token { kind: TokenKind::Ref(r), start, end });
        }
        if self.peek() == Some('$') {
            return Err(LexError::BadChar { position: start, ch: '$' });
        }
        let mut end = start;
        for (off, c) in self.src[start..].char_indices() {
            if is_ident_char(c) {
                end = start + off + c.len_utf8();
            } else {
                break;
            }
        }
        let word = &self.src[start..end];
        if self.src[end..].starts_with('!') {
            let (mut r, ref_end) = self.try_cell_ref(end + 1).ok_or(LexError::DanglingSheet { position: start })?;
            r.sheet = Some(word.to_string());
            self.pos = ref_end;
            return Ok(Token { kind: TokenKind::Ref(r), start, end: ref_end });
        }
        self.pos = end;
        Ok(Token { kind: TokenKind::Ident(word.to_string()), start, end })
    }

    fn next_token(&mut self) -> Option<Result<Token, LexError>> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let c = self.peek()?;
        let start = self.pos;
        let single = |kind: TokenKind, lexer: &mut Lexer| {
            lexer.pos += 1;
            Ok(Token { kind, start, end: start + 1 })
        };
        let tok = match c {
            '0'..='9' => self.lex_number(),
            '.' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.lex_number(),
            '"' => self.lex_string(),
            '\'' => self.lex_quoted_sheet_ref(),
            '(' => single(TokenKind::LParen, self),
            ')' => single(TokenKind::RParen, self),
            ',' => single(TokenKind::Comma, self),
            ':' => single(TokenKind::Colon, self),
            '+' => single(TokenKind::Plus, self),
            '-' => single(TokenKind::Minus, self),
            '*' => single(TokenKind::Star, self),
            '/' => single(TokenKind::Slash, self),
            '^' => single(TokenKind::Caret, self),
            '&' => single(TokenKind::Amp, self),
            '=' => single(TokenKind::Eq, self),
            '<' => match self.peek_at(1) {
                Some('>') => {
                    self.pos += 2;
                    Ok(Token { kind: TokenKind::Ne, start, end: start + 2 })
                }
                Some('=') => {
                    self.pos += 2;
                    Ok(Token { kind: TokenKind::Le, start, end: start + 2 })
                }
                _ => single(TokenKind::Lt, self),
            },
            '>' => match self.peek_at(1) {
                Some('=') => {
                    self.pos += 2;
                    Ok(Token { kind: TokenKind::Ge, start, end: start + 2 })
                }
                _ => single(TokenKind::Gt, self),
            },
            c if is_ident_start(c) || c == '$' => self.lex_word(),
            other => Err(LexError::BadChar { position: start, ch: other }),
        };
        Some(tok)
    }
}

/// Strips one leading `=` if present.
pub fn strip_equals(text: &str) -> &str {
    text.strip_prefix('=').unwrap_or(text)
}

/// Tokenizes formula text. A leading `=` is skipped; offsets are relative to
/// the text after it.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer { src: strip_equals(text), pos: 0 };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token() {
        out.push(tok?);
    }
    Ok(out)
}

/// Rewrites relative references by the given offsets, leaving `$`-anchored
/// parts alone. Used to expand shared formulas. Returns `None` if a shifted
/// reference falls off the sheet or the text does not tokenize.
pub fn shift_references(text: &str, d_col: i64, d_row: i64) -> Option<String> {
    let body = strip_equals(text);
    let tokens = tokenize(body).ok()?;
    let mut out = String::with_capacity(body.len());
    let mut last = 0;
    for tok in &tokens {
        if let TokenKind::Ref(r) = &tok.kind {
            let col = if r.col_abs { i64::from(r.col) } else { i64::from(r.col) + d_col };
            let row = if r.row_abs { i64::from(r.row) } else { i64::from(r.row) + d_row };
            let coord = Coord::new(u32::try_from(col).ok()?, u32::try_from(row).ok()?).ok()?;
            out.push_str(&body[last..tok.start]);
            if let Some(sheet) = &r.sheet {
                out.push_str(&crate::address::quote_sheet_name(sheet));
                out.push('!');
            }
            if r.col_abs {
                out.push('$');
            }
            out.push_str(&crate::address::column_name(coord.col));
            if r.row_abs {
                out.push('$');
            }
            out.push_str(&coord.row.to_string());
            last = tok.end;
        }
    }
    out.push_str(&body[last..]);
    Some(out)
}
