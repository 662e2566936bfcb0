//! A1-style cell coordinates.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_COLUMN: u32 = 16_384;
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("malformed cell reference {0:?}")]
    Malformed(String),
    #[error("cell reference {0:?} is out of bounds")]
    OutOfBounds(String),
}

/// Column/row position on a sheet, both 1-based.
///
/// Ordering is row-major (row first, then column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub col: u32,
    pub row: u32,
}

impl Coord {
    pub fn new(col: u32, row: u32) -> Result<Self, AddressError> {
        if col == 0 || row == 0 || col > MAX_COLUMN || row > MAX_ROW {
            return Err(AddressError::OutOfBounds(format!("col {col}, row {row}")));
        }
        Ok(Coord { col, row })
    }

    pub fn to_a1(self) -> String {
        format!("{}{}", column_name(self.col), self.row)
    }
}

impl Ord for Coord {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Coord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", column_name(self.col), self.row)
    }
}

impl std::str::FromStr for Coord {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_a1(s)
    }
}

/// Bijective base-26 column name: 1 → `A`, 26 → `Z`, 27 → `AA`.
pub fn column_name(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Decodes a column name; `None` when empty, non-alphabetic or past `XFD`.
pub fn column_number(name: &str) -> Option<u32> {
    if name.is_empty() || name.len() > 3 {
        return None;
    }
    let mut col = 0u32;
    for b in name.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + u32::from(b.to_ascii_uppercase() - b'A' + 1);
    }
    (col <= MAX_COLUMN).then_some(col)
}

/// Parses `E19`, `$E$19`, `aa10` into a coordinate. `$` markers are dropped.
pub fn parse_a1(text: &str) -> Result<Coord, AddressError> {
    let malformed = || AddressError::Malformed(text.to_string());
    let bytes = text.as_bytes();
    let mut i = 0;
    if bytes.get(i) == Some(&b'$') {
        i += 1;
    }
    let letters_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
        i += 1;
    }
    let letters = &text[letters_start..i];
    if bytes.get(i) == Some(&b'$') {
        i += 1;
    }
    let digits = &text[i..];
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    if digits.starts_with('0') {
        return Err(malformed());
    }
    let col = column_number(letters).ok_or_else(|| AddressError::OutOfBounds(text.to_string()))?;
    let row: u32 = digits.parse().map_err(|_| AddressError::OutOfBounds(text.to_string()))?;
    if row > MAX_ROW {
        return Err(AddressError::OutOfBounds(text.to_string()));
    }
    Ok(Coord { col, row })
}

/// A cell on a named sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellAddress {
    pub sheet: String,
    pub col: u32,
    pub row: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, coord: Coord) -> Self {
        CellAddress { sheet: sheet.into(), col: coord.col, row: coord.row }
    }

    /// `sheet` plus an A1 reference; panics on malformed input. Test and
    /// fixture convenience.
    pub fn at(sheet: &str, a1: &str) -> Self {
        CellAddress::new(sheet, parse_a1(a1).expect("valid A1 reference"))
    }

    pub fn coord(&self) -> Coord {
        Coord { col: self.col, row: self.row }
    }

    pub fn a1(&self) -> String {
        self.coord().to_a1()
    }

    /// `Sheet!A1` text, quoting the sheet name when needed.
    pub fn qualified(&self) -> String {
        format!("{}!{}", quote_sheet_name(&self.sheet), self.a1())
    }
}

impl Ord for CellAddress {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sheet.cmp(&other.sheet).then(self.row.cmp(&other.row)).then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for CellAddress {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.qualified())
    }
}

/// Serialized as `{"sheet": ..., "cell": "A1"}`.
#[derive(Serialize, Deserialize)]
struct AddressRepr {
    sheet: String,
    cell: String,
}

impl Serialize for CellAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        AddressRepr { sheet: self.sheet.clone(), cell: self.a1() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CellAddress {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = AddressRepr::deserialize(deserializer)?;
        let coord = parse_a1(&repr.cell).map_err(serde::de::Error::custom)?;
        Ok(CellAddress::new(repr.sheet, coord))
    }
}

/// Quotes a sheet name for use in a reference when it is not a plain
/// identifier (or could be mistaken for a cell reference).
pub fn quote_sheet_name(name: &str) -> String {
    let plain = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && parse_a1(name).is_err()
        && !name.eq_ignore_ascii_case("TRUE")
        && !name.eq_ignore_ascii_case("FALSE");
    if plain {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}
