//! In-memory workbook model plus JSON and XLSX codecs.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::address::{parse_a1, CellAddress, Coord};
use crate::number::Rational;

pub mod json;
pub mod xlsx;

pub use json::{read_json, to_json_string, workbook_from_json_str, write_json, JsonError};
pub use xlsx::{read_xlsx, read_xlsx_bytes, write_xlsx, write_xlsx_bytes, XlsxError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkbookError {
    #[error("a workbook needs at least one sheet")]
    NoSheets,
    #[error("duplicate sheet name {0:?}")]
    DuplicateSheet(String),
    #[error("duplicate defined name {0:?} on sheet {1:?}")]
    DuplicateName(String, String),
    #[error("cell {0} holds both a formula and a literal")]
    FormulaAndLiteral(String),
    #[error("validation at {0} has low > high")]
    InvertedBounds(String),
    #[error("validation at {0}: {1} needs bounds")]
    MissingBounds(String, &'static str),
}

/// A literal cell value. Numbers are exact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Literal {
    Number(Rational),
    Text(String),
    Bool(bool),
    #[default]
    Blank,
}

impl Literal {
    pub fn is_blank(&self) -> bool {
        matches!(self, Literal::Blank)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Literal::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<&Rational> {
        match self {
            Literal::Number(n) => Some(n),
            _ => None,
        }
    }
}

/// Display format. Only a handful of patterns are understood; anything else
/// is kept verbatim and reported as unsupported.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NumberFormat(String);

impl NumberFormat {
    pub const SUPPORTED: [&'static str; 5] = ["General", "0", "0.0", "0.00", "0.000"];

    pub fn new(pattern: impl Into<String>) -> Self {
        NumberFormat(pattern.into())
    }

    pub fn general() -> Self {
        NumberFormat("General".into())
    }

    /// Fixed format with `places` decimals (0..=3).
    pub fn fixed(places: u32) -> Self {
        assert!(places <= 3, "supported fixed formats have at most 3 decimals");
        NumberFormat(Self::SUPPORTED[places as usize + 1].to_string())
    }

    pub fn pattern(&self) -> &str {
        &self.0
    }

    pub fn is_supported(&self) -> bool {
        Self::SUPPORTED.contains(&self.0.as_str())
    }

    pub fn is_general(&self) -> bool {
        self.0 == "General"
    }

    /// Decimal places for fixed formats; `None` for General and unsupported
    /// patterns.
    pub fn decimals(&self) -> Option<u32> {
        match self.0.as_str() {
            "0" => Some(0),
            "0.0" => Some(1),
            "0.00" => Some(2),
            "0.000" => Some(3),
            _ => None,
        }
    }
}

impl Default for NumberFormat {
    fn default() -> Self {
        NumberFormat::general()
    }
}

impl fmt::Display for NumberFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValidationKind {
    WholeNumberRange,
    DecimalRange,
    List,
    NonBlankOnly,
    CustomPredicate,
}

impl ValidationKind {
    pub const ALL: [ValidationKind; 5] = [
        ValidationKind::WholeNumberRange,
        ValidationKind::DecimalRange,
        ValidationKind::List,
        ValidationKind::NonBlankOnly,
        ValidationKind::CustomPredicate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationKind::WholeNumberRange => "whole-number-range",
            ValidationKind::DecimalRange => "decimal-range",
            ValidationKind::List => "list",
            ValidationKind::NonBlankOnly => "non-blank-only",
            ValidationKind::CustomPredicate => "custom-predicate-text",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == text)
    }

    pub fn is_range(self) -> bool {
        matches!(self, ValidationKind::WholeNumberRange | ValidationKind::DecimalRange)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationRule {
    pub kind: ValidationKind,
    pub bounds: Option<(Rational, Rational)>,
}

impl ValidationRule {
    pub fn range(kind: ValidationKind, low: Rational, high: Rational) -> Self {
        ValidationRule { kind, bounds: Some((low, high)) }
    }

    pub fn decimal_range(low: Rational, high: Rational) -> Self {
        Self::range(ValidationKind::DecimalRange, low, high)
    }

    pub fn non_blank() -> Self {
        ValidationRule { kind: ValidationKind::NonBlankOnly, bounds: None }
    }

    fn check(&self, at: &str) -> Result<(), WorkbookError> {
        match (&self.bounds, self.kind.is_range()) {
            (Some((low, high)), _) if low > high => Err(WorkbookError::InvertedBounds(at.into())),
            (None, true) => Err(WorkbookError::MissingBounds(at.into(), self.kind.as_str())),
            _ => Ok(()),
        }
    }
}

/// Everything the model keeps about one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellContent {
    /// Formula text without the leading `=`.
    pub formula: Option<String>,
    pub literal: Literal,
    pub format: NumberFormat,
    pub locked: bool,
    pub validation: Option<ValidationRule>,
    /// Free-form annotations (fixture provenance). JSON-only.
    pub meta: BTreeMap<String, String>,
}

impl Default for CellContent {
    fn default() -> Self {
        CellContent {
            formula: None,
            literal: Literal::Blank,
            format: NumberFormat::general(),
            locked: true,
            validation: None,
            meta: BTreeMap::new(),
        }
    }
}

impl CellContent {
    /// A formula cell. A leading `=` is stripped.
    pub fn formula(text: &str) -> Self {
        CellContent { formula: Some(text.strip_prefix('=').unwrap_or(text).to_string()), ..Default::default() }
    }

    pub fn number(value: Rational) -> Self {
        CellContent { literal: Literal::Number(value), ..Default::default() }
    }

    pub fn text(text: impl Into<String>) -> Self {
        CellContent { literal: Literal::Text(text.into()), ..Default::default() }
    }

    pub fn boolean(value: bool) -> Self {
        CellContent { literal: Literal::Bool(value), ..Default::default() }
    }

    pub fn blank() -> Self {
        CellContent::default()
    }

    pub fn with_format(mut self, format: NumberFormat) -> Self {
        self.format = format;
        self
    }

    pub fn unlocked(mut self) -> Self {
        self.locked = false;
        self
    }

    pub fn with_validation(mut self, rule: ValidationRule) -> Self {
        self.validation = Some(rule);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// Formula text with the leading `=` restored.
    pub fn formula_text(&self) -> Option<String> {
        self.formula.as_ref().map(|f| format!("={f}"))
    }

    pub fn has_formula(&self) -> bool {
        self.formula.is_some()
    }
}

/// Target of a defined name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameTarget {
    Cell(Coord),
    Range(Coord, Coord),
}

impl NameTarget {
    pub fn parse(text: &str) -> Option<Self> {
        match text.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (parse_a1(a).ok()?, parse_a1(b).ok()?);
                Some(NameTarget::Range(a, b))
            }
            None => parse_a1(text).ok().map(NameTarget::Cell),
        }
    }

    pub fn to_text(self) -> String {
        match self {
            NameTarget::Cell(c) => c.to_a1(),
            NameTarget::Range(a, b) => format!("{}:{}", a.to_a1(), b.to_a1()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sheet {
    pub name: String,
    pub cells: BTreeMap<Coord, CellContent>,
    pub protected: bool,
    pub defined_names: BTreeMap<String, NameTarget>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Sheet { name: name.into(), cells: BTreeMap::new(), protected: false, defined_names: BTreeMap::new() }
    }

    pub fn protected(mut self, protected: bool) -> Self {
        self.protected = protected;
        self
    }

    /// Inserts or replaces a cell, addressed by A1 text. Panics on a
    /// malformed address; fixture-building convenience.
    pub fn set(&mut self, a1: &str, content: CellContent) -> &mut Self {
        self.cells.insert(parse_a1(a1).expect("valid A1 reference"), content);
        self
    }

    pub fn get(&self, coord: Coord) -> Option<&CellContent> {
        self.cells.get(&coord)
    }

    pub fn get_a1(&self, a1: &str) -> Option<&CellContent> {
        parse_a1(a1).ok().and_then(|c| self.cells.get(&c))
    }

    /// Adds a defined name; names are unique ignoring case.
    pub fn define_name(&mut self, name: &str, target: NameTarget) -> Result<(), WorkbookError> {
        if self.lookup_name(name).is_some() {
            return Err(WorkbookError::DuplicateName(name.to_string(), self.name.clone()));
        }
        self.defined_names.insert(name.to_string(), target);
        Ok(())
    }

    pub fn lookup_name(&self, name: &str) -> Option<NameTarget> {
        self.defined_names.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| *v)
    }

    pub fn formula_cells(&self) -> impl Iterator<Item = (Coord, &str)> {
        self.cells.iter().filter_map(|(c, content)| content.formula.as_deref().map(|f| (*c, f)))
    }

    fn check(&self) -> Result<(), WorkbookError> {
        let mut seen: Vec<String> = Vec::new();
        for name in self.defined_names.keys() {
            let lower = name.to_lowercase();
            if seen.contains(&lower) {
                return Err(WorkbookError::DuplicateName(name.clone(), self.name.clone()));
            }
            seen.push(lower);
        }
        for (coord, cell) in &self.cells {
            let at = format!("{}!{}", self.name, coord);
            if cell.formula.is_some() && !cell.literal.is_blank() {
                return Err(WorkbookError::FormulaAndLiteral(at));
            }
            if let Some(rule) = &cell.validation {
                rule.check(&at)?;
            }
        }
        Ok(())
    }
}

/// An ordered collection of uniquely named sheets.
///
/// Equality compares sheets only; `source_path` is provenance.
#[derive(Debug, Clone)]
pub struct Workbook {
    pub sheets: Vec<Sheet>,
    pub source_path: Option<String>,
}

impl PartialEq for Workbook {
    fn eq(&self, other: &Self) -> bool {
        self.sheets == other.sheets
    }
}

impl Eq for Workbook {}

impl Workbook {
    /// Builds a workbook, checking every model invariant.
    pub fn new(sheets: Vec<Sheet>) -> Result<Self, WorkbookError> {
        let wb = Workbook { sheets, source_path: None };
        wb.validate()?;
        Ok(wb)
    }

    pub fn validate(&self) -> Result<(), WorkbookError> {
        if self.sheets.is_empty() {
            return Err(WorkbookError::NoSheets);
        }
        let mut seen: Vec<String> = Vec::new();
        for sheet in &self.sheets {
            let lower = sheet.name.to_lowercase();
            if seen.contains(&lower) {
                return Err(WorkbookError::DuplicateSheet(sheet.name.clone()));
            }
            seen.push(lower);
            sheet.check()?;
        }
        Ok(())
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn sheet_mut(&mut self, name: &str) -> Option<&mut Sheet> {
        self.sheets.iter_mut().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn cell(&self, addr: &CellAddress) -> Option<&CellContent> {
        self.sheet(&addr.sheet).and_then(|s| s.get(addr.coord()))
    }

    pub fn cell_mut(&mut self, addr: &CellAddress) -> Option<&mut CellContent> {
        self.sheet_mut(&addr.sheet).and_then(|s| s.cells.get_mut(&addr.coord()))
    }

    pub fn contains(&self, addr: &CellAddress) -> bool {
        self.cell(addr).is_some()
    }

    /// Canonical spelling of a sheet name as stored in this workbook.
    pub fn canonical_sheet_name(&self, name: &str) -> Option<&str> {
        self.sheet(name).map(|s| s.name.as_str())
    }

    /// All cells in (sheet order, row, column) order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddress, &CellContent)> {
        self.sheets.iter().flat_map(|sheet| {
            sheet.cells.iter().map(move |(coord, content)| (CellAddress::new(sheet.name.clone(), *coord), content))
        })
    }

    /// Copy with all per-cell metadata removed (the XLSX codec does not
    /// carry it).
    pub fn without_meta(&self) -> Workbook {
        let mut wb = self.clone();
        for sheet in &mut wb.sheets {
            for cell in sheet.cells.values_mut() {
                cell.meta.clear();
            }
        }
        wb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::int;

    #[test]
    fn rejects_duplicate_sheets_case_insensitively() {
        let err = Workbook::new(vec![Sheet::new("Doses"), Sheet::new("DOSES")]).unwrap_err();
        assert_eq!(err, WorkbookError::DuplicateSheet("DOSES".into()));
        assert_eq!(Workbook::new(vec![]).unwrap_err(), WorkbookError::NoSheets);
    }

    #[test]
    fn rejects_formula_plus_literal() {
        let mut sheet = Sheet::new("S");
        let mut cell = CellContent::formula("=A2");
        cell.literal = Literal::Number(int(3));
        sheet.cells.insert(parse_a1("A1").unwrap(), cell);
        assert!(matches!(Workbook::new(vec![sheet]), Err(WorkbookError::FormulaAndLiteral(_))));
    }

    #[test]
    fn rejects_inverted_validation() {
        let mut sheet = Sheet::new("S");
        sheet.set("E19", CellContent::blank().with_validation(ValidationRule::decimal_range(int(5), int(1))));
        assert!(matches!(Workbook::new(vec![sheet]), Err(WorkbookError::InvertedBounds(_))));
    }

    #[test]
    fn defined_names_are_case_insensitive() {
        let mut sheet = Sheet::new("S");
        sheet.define_name("Bodyweight", NameTarget::Cell(parse_a1("E19").unwrap())).unwrap();
        assert!(sheet.define_name("BODYWEIGHT", NameTarget::Cell(parse_a1("E20").unwrap())).is_err());
        assert_eq!(sheet.lookup_name("bodyweight"), Some(NameTarget::Cell(parse_a1("E19").unwrap())));
    }

    #[test]
    fn formula_equals_sign_is_stripped_and_restored() {
        let cell = CellContent::formula("=E19*0.02");
        assert_eq!(cell.formula.as_deref(), Some("E19*0.02"));
        assert_eq!(cell.formula_text().as_deref(), Some("=E19*0.02"));
    }

    #[test]
    fn number_formats() {
        assert!(NumberFormat::new("0.000").is_supported());
        assert_eq!(NumberFormat::new("0.000").decimals(), Some(3));
        let date = NumberFormat::new("yyyy-mm-dd");
        assert!(!date.is_supported());
        assert_eq!(date.decimals(), None);
        assert_eq!(NumberFormat::fixed(2).pattern(), "0.00");
    }
}
