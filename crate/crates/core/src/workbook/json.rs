//! JSON interchange: an address → content listing per sheet.
//!
//! ```json
//! { "sheets": [ { "name": "S", "protected": false,
//!     "cells": { "A1": { "formula": "=B1*2", "format": "0.00" },
//!                "B1": { "value": "0.5", "locked": false } },
//!     "defined_names": { "Rate": "B1" } } ] }
//! ```
//!
//! Numbers are decimal strings (or `n/d` for non-terminating values). Text
//! that would read back as a number is written with a leading `'`, and text
//! that itself starts with `'` gains one more, mirroring the spreadsheet
//! convention for forcing text entry.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{
    CellContent, Literal, NameTarget, NumberFormat, Sheet, ValidationKind, ValidationRule, Workbook, WorkbookError,
};
use crate::address::parse_a1;
use crate::number::{parse_exact, to_exact_string};

/// Marker key inserted by the strict reader when an object repeats a key.
const DUPLICATE_MARKER: &str = "\u{0}duplicate";

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error(transparent)]
    Model(#[from] WorkbookError),
}

/// JSON value that records duplicate object keys instead of silently keeping
/// the last one.
struct StrictValue(Value);

impl<'de> Deserialize<'de> for StrictValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(StrictVisitor).map(StrictValue)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }
    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }
    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }
    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(Value::from(v))
    }
    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_string()))
    }
    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }
    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }
    fn visit_none<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(StrictValue(v)) = seq.next_element()? {
            items.push(v);
        }
        Ok(Value::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Value, A::Error> {
        let mut map = Map::new();
        while let Some(key) = access.next_key::<String>()? {
            let StrictValue(value) = access.next_value()?;
            if map.contains_key(&key) && !map.contains_key(DUPLICATE_MARKER) {
                map.insert(DUPLICATE_MARKER.to_string(), Value::String(key.clone()));
            }
            map.insert(key, value);
        }
        Ok(Value::Object(map))
    }
}

fn escape_pointer(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn schema(pointer: &str, message: impl Into<String>) -> JsonError {
    JsonError::Schema { pointer: if pointer.is_empty() { "/".into() } else { pointer.into() }, message: message.into() }
}

fn as_object<'a>(value: &'a Value, pointer: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, JsonError> {
    let obj = value.as_object().ok_or_else(|| schema(pointer, "expected an object"))?;
    if let Some(Value::String(key)) = obj.get(DUPLICATE_MARKER) {
        return Err(schema(pointer, format!("duplicate key {key:?}")));
    }
    if !allowed.is_empty() {
        if let Some(unknown) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(schema(&format!("{pointer}/{}", escape_pointer(unknown)), "unknown field"));
        }
    }
    Ok(obj)
}

fn checked_map<'a>(value: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>, JsonError> {
    as_object(value, pointer, &[])
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str, pointer: &str) -> Result<Option<&'a str>, JsonError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(schema(&format!("{pointer}/{key}"), "expected a string")),
    }
}

fn get_bool(obj: &Map<String, Value>, key: &str, pointer: &str) -> Result<Option<bool>, JsonError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::Bool(b)) => Ok(Some(*b)),
        Some(_) => Err(schema(&format!("{pointer}/{key}"), "expected a boolean")),
    }
}

fn decode_literal(value: &Value, pointer: &str) -> Result<Literal, JsonError> {
    match value {
        Value::Null => Ok(Literal::Blank),
        Value::Bool(b) => Ok(Literal::Bool(*b)),
        Value::String(s) => Ok(decode_text_value(s)),
        Value::Number(_) => Err(schema(pointer, "numbers must be written as decimal strings")),
        _ => Err(schema(pointer, "expected a string, boolean or null")),
    }
}

fn decode_text_value(s: &str) -> Literal {
    if let Some(rest) = s.strip_prefix('\'') {
        return Literal::Text(rest.to_string());
    }
    match parse_exact(s) {
        Some(n) => Literal::Number(n),
        None => Literal::Text(s.to_string()),
    }
}

fn encode_literal(literal: &Literal) -> Value {
    match literal {
        Literal::Blank => Value::Null,
        Literal::Bool(b) => Value::Bool(*b),
        Literal::Number(n) => Value::String(to_exact_string(n)),
        Literal::Text(t) => {
            if t.starts_with('\'') || parse_exact(t).is_some() {
                Value::String(format!("'{t}"))
            } else {
                Value::String(t.clone())
            }
        }
    }
}

fn decode_bound(
    obj: &Map<String, Value>,
    key: &str,
    pointer: &str,
) -> Result<Option<crate::number::Rational>, JsonError> {
    match get_str(obj, key, pointer)? {
        None => Ok(None),
        Some(text) => parse_exact(text)
            .map(Some)
            .ok_or_else(|| schema(&format!("{pointer}/{key}"), format!("{text:?} is not a number"))),
    }
}

fn decode_validation(value: &Value, pointer: &str) -> Result<ValidationRule, JsonError> {
    let obj = as_object(value, pointer, &["kind", "low", "high"])?;
    let kind_text = get_str(obj, "kind", pointer)?.ok_or_else(|| schema(pointer, "missing \"kind\""))?;
    let kind = ValidationKind::parse(kind_text)
        .ok_or_else(|| schema(&format!("{pointer}/kind"), format!("unknown validation kind {kind_text:?}")))?;
    let low = decode_bound(obj, "low", pointer)?;
    let high = decode_bound(obj, "high", pointer)?;
    let bounds = match (low, high) {
        (Some(l), Some(h)) => {
            if l > h {
                return Err(schema(pointer, "low must not exceed high"));
            }
            Some((l, h))
        }
        (None, None) => None,
        _ => return Err(schema(pointer, "\"low\" and \"high\" must appear together")),
    };
    if kind.is_range() && bounds.is_none() {
        return Err(schema(pointer, format!("{} requires low and high", kind.as_str())));
    }
    Ok(ValidationRule { kind, bounds })
}

fn decode_cell(value: &Value, pointer: &str) -> Result<CellContent, JsonError> {
    let obj = as_object(value, pointer, &["formula", "value", "format", "locked", "validation", "x-meta"])?;
    let mut cell = CellContent::blank();
    if let Some(f) = get_str(obj, "formula", pointer)? {
        cell.formula = Some(f.strip_prefix('=').unwrap_or(f).to_string());
    }
    if let Some(v) = obj.get("value") {
        cell.literal = decode_literal(v, &format!("{pointer}/value"))?;
    }
    if cell.formula.is_some() && !cell.literal.is_blank() {
        return Err(schema(pointer, "a cell may hold a formula or a value, not both"));
    }
    if let Some(fmt) = get_str(obj, "format", pointer)? {
        cell.format = NumberFormat::new(fmt);
    }
    if let Some(locked) = get_bool(obj, "locked", pointer)? {
        cell.locked = locked;
    }
    if let Some(v) = obj.get("validation") {
        cell.validation = Some(decode_validation(v, &format!("{pointer}/validation"))?);
    }
    if let Some(meta) = obj.get("x-meta") {
        let meta_ptr = format!("{pointer}/x-meta");
        for (k, v) in checked_map(meta, &meta_ptr)? {
            let s =
                v.as_str().ok_or_else(|| schema(&format!("{meta_ptr}/{}", escape_pointer(k)), "expected a string"))?;
            cell.meta.insert(k.clone(), s.to_string());
        }
    }
    Ok(cell)
}

fn decode_sheet(value: &Value, pointer: &str) -> Result<Sheet, JsonError> {
    let obj = as_object(value, pointer, &["name", "protected", "cells", "defined_names"])?;
    let name = get_str(obj, "name", pointer)?.ok_or_else(|| schema(pointer, "missing \"name\""))?;
    if name.is_empty() {
        return Err(schema(&format!("{pointer}/name"), "sheet name must not be empty"));
    }
    let protected = get_bool(obj, "protected", pointer)?.unwrap_or(false);
    let mut sheet = Sheet::new(name).protected(protected);
    let cells_ptr = format!("{pointer}/cells");
    let cells = obj.get("cells").ok_or_else(|| schema(pointer, "missing \"cells\""))?;
    for (key, cell) in checked_map(cells, &cells_ptr)? {
        let cell_ptr = format!("{cells_ptr}/{}", escape_pointer(key));
        let coord = parse_a1(key).map_err(|e| schema(&cell_ptr, e.to_string()))?;
        if sheet.cells.contains_key(&coord) {
            return Err(schema(&cell_ptr, format!("duplicate cell {coord} (spelled {key:?})")));
        }
        sheet.cells.insert(coord, decode_cell(cell, &cell_ptr)?);
    }
    if let Some(names) = obj.get("defined_names") {
        let names_ptr = format!("{pointer}/defined_names");
        for (name, target) in checked_map(names, &names_ptr)? {
            let name_ptr = format!("{names_ptr}/{}", escape_pointer(name));
            let text = target.as_str().ok_or_else(|| schema(&name_ptr, "expected a string"))?;
            let target = NameTarget::parse(text)
                .ok_or_else(|| schema(&name_ptr, format!("{text:?} is not an A1 cell or range")))?;
            sheet.define_name(name, target).map_err(|e| schema(&name_ptr, e.to_string()))?;
        }
    }
    Ok(sheet)
}

/// Parses interchange JSON text into a validated workbook.
pub fn workbook_from_json_str(text: &str) -> Result<Workbook, JsonError> {
    let StrictValue(root) = serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    let obj = as_object(&root, "", &["sheets"])?;
    let sheets = obj
        .get("sheets")
        .ok_or_else(|| schema("", "missing \"sheets\""))?
        .as_array()
        .ok_or_else(|| schema("/sheets", "expected an array"))?;
    let mut out = Vec::with_capacity(sheets.len());
    for (i, s) in sheets.iter().enumerate() {
        out.push(decode_sheet(s, &format!("/sheets/{i}"))?);
    }
    if out.is_empty() {
        return Err(schema("/sheets", "at least one sheet is required"));
    }
    let mut seen: Vec<String> = Vec::new();
    for (i, s) in out.iter().enumerate() {
        let lower = s.name.to_lowercase();
        if seen.contains(&lower) {
            return Err(schema(&format!("/sheets/{i}/name"), format!("duplicate sheet name {:?}", s.name)));
        }
        seen.push(lower);
    }
    Ok(Workbook::new(out)?)
}

fn encode_cell(cell: &CellContent) -> Value {
    let mut obj = Map::new();
    if let Some(text) = cell.formula_text() {
        obj.insert("formula".into(), Value::String(text));
    }
    if !cell.literal.is_blank() {
        obj.insert("value".into(), encode_literal(&cell.literal));
    }
    if !cell.format.is_general() {
        obj.insert("format".into(), Value::String(cell.format.pattern().to_string()));
    }
    if !cell.locked {
        obj.insert("locked".into(), Value::Bool(false));
    }
    if let Some(rule) = &cell.validation {
        let mut v = Map::new();
        v.insert("kind".into(), Value::String(rule.kind.as_str().into()));
        if let Some((low, high)) = &rule.bounds {
            v.insert("low".into(), Value::String(to_exact_string(low)));
            v.insert("high".into(), Value::String(to_exact_string(high)));
        }
        obj.insert("validation".into(), Value::Object(v));
    }
    if !cell.meta.is_empty() {
        let meta: Map<String, Value> = cell.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        obj.insert("x-meta".into(), Value::Object(meta));
    }
    Value::Object(obj)
}

fn encode_workbook(wb: &Workbook) -> Value {
    let sheets = wb
        .sheets
        .iter()
        .map(|sheet| {
            let mut obj = Map::new();
            obj.insert("name".into(), Value::String(sheet.name.clone()));
            obj.insert("protected".into(), Value::Bool(sheet.protected));
            let cells: BTreeMap<String, Value> =
                sheet.cells.iter().map(|(c, content)| (c.to_a1(), encode_cell(content))).collect();
            obj.insert("cells".into(), Value::Object(cells.into_iter().collect()));
            if !sheet.defined_names.is_empty() {
                let names: Map<String, Value> =
                    sheet.defined_names.iter().map(|(k, v)| (k.clone(), Value::String(v.to_text()))).collect();
                obj.insert("defined_names".into(), Value::Object(names));
            }
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    root.insert("sheets".into(), Value::Array(sheets));
    Value::Object(root)
}

/// Deterministic pretty-printed JSON (sorted keys, trailing newline).
pub fn to_json_string(wb: &Workbook) -> String {
    let mut text = serde_json::to_string_pretty(&encode_workbook(wb)).expect("serializable");
    text.push('\n');
    text
}

pub fn read_json(path: impl AsRef<Path>) -> Result<Workbook, JsonError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| JsonError::Io { path: path.display().to_string(), source })?;
    let mut wb = workbook_from_json_str(&text)?;
    wb.source_path = Some(path.display().to_string());
    Ok(wb)
}

pub fn write_json(wb: &Workbook, path: impl AsRef<Path>) -> Result<(), JsonError> {
    let path = path.as_ref();
    fs::write(path, to_json_string(wb)).map_err(|source| JsonError::Io { path: path.display().to_string(), source })
}
