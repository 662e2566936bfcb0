//! Unit tokens and per-kilogram rates in label text, and the layout
//! conventions that connect a formula to its labels and column header.

use std::ops::Range;

use regex::Regex;

use crate::address::Coord;
use crate::number::{parse_decimal, Rational};
use crate::workbook::{Literal, Sheet};

/// Canonical spelling of a lexicon unit (`µg` and `ug` are `mcg`).
fn canonical(unit: &str) -> String {
    match unit {
        "µg" | "μg" | "ug" => "mcg".to_string(),
        other => other.to_string(),
    }
}

fn matches_lexicon(token: &str, lexicon: &[String]) -> Option<String> {
    lexicon.iter().find_map(|u| {
        // single letters (g, L) must match exactly; longer units ignore case
        let hit = if u.chars().count() == 1 { token == u } else { token.eq_ignore_ascii_case(u) };
        hit.then(|| canonical(u))
    })
}

/// Lexicon units named in `text` with their byte spans, in order. A unit
/// written as a divisor (the `kg` of `mg/kg`) is not the quantity's unit and
/// is skipped.
pub fn unit_spans(text: &str, lexicon: &[String]) -> Vec<(Range<usize>, String)> {
    let mut out = Vec::new();
    let mut prev: Option<char> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        if !c.is_alphabetic() {
            if !c.is_whitespace() {
                prev = Some(c);
            }
            continue;
        }
        let mut end = start + c.len_utf8();
        while let Some(&(i, d)) = chars.peek() {
            if !d.is_alphabetic() {
                break;
            }
            end = i + d.len_utf8();
            chars.next();
        }
        if prev != Some('/') {
            if let Some(u) = matches_lexicon(&text[start..end], lexicon) {
                out.push((start..end, u));
            }
        }
        prev = Some('a');
    }
    out
}

/// Distinct lexicon units named in `text`, in order of first appearance.
pub fn unit_tokens(text: &str, lexicon: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (_, u) in unit_spans(text, lexicon) {
        if !out.contains(&u) {
            out.push(u);
        }
    }
    out
}

/// A rate such as `0.02 mg/kg` read from a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRate {
    pub value: Rational,
    pub unit: String,
    pub text: String,
}

impl LabelRate {
    /// The values a formula could use for this rate: as written, or
    /// converted a thousandfold either way (mg and mcg).
    pub fn candidates(&self) -> [Rational; 3] {
        let k = Rational::from_integer(1000.into());
        [self.value.clone(), &self.value / &k, &self.value * &k]
    }
}

/// Finds the first `number unit/kg` pattern in `text` whose unit is a
/// lexicon mass unit.
pub fn extract_rate(text: &str, lexicon: &[String]) -> Option<LabelRate> {
    let mass: Vec<String> = lexicon
        .iter()
        .filter(|u| canonical(u).ends_with('g') && !u.eq_ignore_ascii_case("kg"))
        .map(|u| regex::escape(u))
        .collect();
    if mass.is_empty() {
        return None;
    }
    let pattern = format!(r"(?i)(\d+(?:\.\d+)?|\.\d+)\s*({})\s*/\s*kg\b", mass.join("|"));
    let re = Regex::new(&pattern).expect("escaped lexicon builds a valid pattern");
    let caps = re.captures(text)?;
    let number = &caps[1];
    let number = if number.starts_with('.') { format!("0{number}") } else { number.to_string() };
    Some(LabelRate {
        value: parse_decimal(&number)?,
        unit: matches_lexicon(&caps[2], lexicon)?,
        text: caps[0].to_string(),
    })
}

/// Label cells for the formula at `at`: text cells to its left in the same
/// row, nearest first, stopping at the first number, formula or boolean.
pub fn label_cells(sheet: &Sheet, at: Coord) -> Vec<Coord> {
    let mut out = Vec::new();
    for col in (1..at.col).rev() {
        let coord = Coord { col, row: at.row };
        let Some(cell) = sheet.get(coord) else { continue };
        if cell.has_formula() {
            break;
        }
        match &cell.literal {
            Literal::Text(t) if !t.trim().is_empty() => out.push(coord),
            Literal::Blank => {}
            Literal::Text(_) => {}
            _ => break,
        }
    }
    out
}

/// The header governing the cell at `at`: the text cell in `header_row`
/// when one is configured, otherwise the nearest text cell above.
pub fn header_cell(sheet: &Sheet, at: Coord, header_row: Option<u32>) -> Option<Coord> {
    let is_text = |coord: Coord| {
        sheet.get(coord).is_some_and(|c| !c.has_formula() && c.literal.as_text().is_some_and(|t| !t.trim().is_empty()))
    };
    match header_row {
        Some(row) if row < at.row => Some(Coord { col: at.col, row }).filter(|c| is_text(*c)),
        Some(_) => None,
        None => (1..at.row).rev().map(|row| Coord { col: at.col, row }).find(|c| is_text(*c)),
    }
}

pub(crate) fn cell_text(sheet: &Sheet, coord: Coord) -> &str {
    sheet.get(coord).and_then(|c| c.literal.as_text()).unwrap_or("")
}
