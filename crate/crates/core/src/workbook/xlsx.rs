//! Reading and writing the subset of SpreadsheetML the auditor models.
//!
//! Kept: cell literals and formulas (shared formulas are expanded), number
//! formats, the locked flag, sheet protection, data validation and defined
//! names. Everything else in an input file is ignored. Cached values of
//! formula cells are not read; the evaluator recomputes them.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use quick_xml::escape::{escape, resolve_predefined_entity};
use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};
use thiserror::Error;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::{
    CellContent, Literal, NameTarget, NumberFormat, Sheet, ValidationKind, ValidationRule, Workbook, WorkbookError,
};
use crate::address::{parse_a1, quote_sheet_name, Coord};
use crate::formula::shift_references;
use crate::number::{format_general, int, is_terminating, parse_decimal, to_exact_string, Rational};

/// Validation `sqref` ranges larger than this are truncated when expanded.
const MAX_VALIDATION_CELLS: u64 = 100_000;
/// First id available for custom number formats.
const FIRST_CUSTOM_FORMAT: u32 = 164;

#[derive(Debug, Error)]
pub enum XlsxError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a zip archive: {0}")]
    NotZip(String),
    #[error("missing part {0}")]
    MissingPart(String),
    #[error("malformed XML in {part} at byte {offset}: {message}")]
    Xml { part: String, offset: u64, message: String },
    #[error("invalid content in {part}: {message}")]
    Content { part: String, message: String },
    #[error(transparent)]
    Model(#[from] WorkbookError),
}

// ---------------------------------------------------------------------------
// A tiny element tree, enough for the parts we read.

#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
}

impl Node {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

fn local(name: &str) -> String {
    name.rsplit_once(':').map_or(name, |(_, l)| l).to_string()
}

fn parse_xml(part: &str, xml: &str) -> Result<Node, XlsxError> {
    let mut reader = Reader::from_str(xml);
    let xml_err = |reader: &Reader<&[u8]>, message: String| XlsxError::Xml {
        part: part.to_string(),
        offset: reader.error_position(),
        message,
    };
    let mut stack: Vec<Node> = vec![Node::default()];
    loop {
        let event = reader.read_event().map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => {
                let node = element(&reader, part, &e)?;
                stack.push(node);
            }
            Event::Empty(e) => {
                let node = element(&reader, part, &e)?;
                stack.last_mut().expect("root").children.push(node);
            }
            Event::End(_) => {
                let node = stack.pop().expect("balanced");
                stack.last_mut().ok_or_else(|| xml_err(&reader, "unbalanced end tag".into()))?.children.push(node);
            }
            Event::Text(t) => stack.last_mut().expect("root").text.push_str(&t.xml10_content()),
            Event::CData(t) => {
                stack.last_mut().expect("root").text.push_str(&t.xml10_content());
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(ch)) => ch.to_string(),
                    Ok(None) => resolve_predefined_entity(&r)
                        .ok_or_else(|| xml_err(&reader, format!("unknown entity &{};", &*r)))?
                        .to_string(),
                    Err(e) => return Err(xml_err(&reader, e.to_string())),
                };
                stack.last_mut().expect("root").text.push_str(&resolved);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if stack.len() != 1 {
        return Err(XlsxError::Xml {
            part: part.to_string(),
            offset: reader.buffer_position(),
            message: "unexpected end of document".into(),
        });
    }
    let mut root = stack.pop().expect("root");
    match root.children.len() {
        1 => Ok(root.children.pop().expect("one element")),
        _ => Err(XlsxError::Xml {
            part: part.to_string(),
            offset: reader.buffer_position(),
            message: "expected exactly one root element".into(),
        }),
    }
}

fn element(reader: &Reader<&[u8]>, part: &str, e: &quick_xml::events::BytesStart<'_>) -> Result<Node, XlsxError> {
    let mut node = Node { name: local(e.name().as_ref()), ..Default::default() };
    for attr in e.attributes() {
        let attr = attr.map_err(|err| XlsxError::Xml {
            part: part.to_string(),
            offset: reader.buffer_position(),
            message: err.to_string(),
        })?;
        let value = attr.normalized_value(XmlVersion::Implicit1_0).map_err(|err| XlsxError::Xml {
            part: part.to_string(),
            offset: reader.buffer_position(),
            message: err.to_string(),
        })?;
        node.attrs.push((local(attr.key.as_ref()), value.into_owned()));
    }
    Ok(node)
}

// ---------------------------------------------------------------------------
// Reading

struct Package<R: Read + std::io::Seek> {
    zip: ZipArchive<R>,
}

impl<R: Read + std::io::Seek> Package<R> {
    fn part(&mut self, name: &str) -> Result<Option<String>, XlsxError> {
        let mut file = match self.zip.by_name(name) {
            Ok(f) => f,
            Err(zip::result::ZipError::FileNotFound) => return Ok(None),
            Err(e) => return Err(XlsxError::NotZip(e.to_string())),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)
            .map_err(|e| XlsxError::Content { part: name.to_string(), message: e.to_string() })?;
        String::from_utf8(bytes)
            .map(Some)
            .map_err(|e| XlsxError::Content { part: name.to_string(), message: e.to_string() })
    }

    fn xml(&mut self, name: &str) -> Result<Option<Node>, XlsxError> {
        self.part(name)?.map(|text| parse_xml(name, &text)).transpose()
    }

    fn required(&mut self, name: &str) -> Result<Node, XlsxError> {
        self.xml(name)?.ok_or_else(|| XlsxError::MissingPart(name.to_string()))
    }
}

#[derive(Clone)]
struct Style {
    format: NumberFormat,
    locked: bool,
}

fn builtin_format(id: u32) -> Option<&'static str> {
    Some(match id {
        0 => "General",
        1 => "0",
        2 => "0.00",
        3 => "#,##0",
        4 => "#,##0.00",
        9 => "0%",
        10 => "0.00%",
        11 => "0.00E+00",
        14 => "mm-dd-yy",
        49 => "@",
        _ => return None,
    })
}

fn read_styles(node: Option<Node>) -> Vec<Style> {
    let Some(node) = node else { return Vec::new() };
    let mut custom: HashMap<u32, String> = HashMap::new();
    if let Some(fmts) = node.child("numFmts") {
        for f in fmts.children_named("numFmt") {
            if let (Some(id), Some(code)) = (f.attr("numFmtId"), f.attr("formatCode")) {
                if let Ok(id) = id.parse() {
                    custom.insert(id, code.to_string());
                }
            }
        }
    }
    let Some(xfs) = node.child("cellXfs") else { return Vec::new() };
    xfs.children_named("xf")
        .map(|xf| {
            let id: u32 = xf.attr("numFmtId").and_then(|v| v.parse().ok()).unwrap_or(0);
            let pattern = custom
                .get(&id)
                .cloned()
                .or_else(|| builtin_format(id).map(str::to_string))
                .unwrap_or_else(|| format!("numFmtId:{id}"));
            let locked =
                xf.child("protection").and_then(|p| p.attr("locked")).map_or(true, |v| !matches!(v, "0" | "false"));
            Style { format: NumberFormat::new(pattern), locked }
        })
        .collect()
}

fn read_shared_strings(node: Option<Node>) -> Vec<String> {
    node.map(|n| n.children_named("si").map(string_item).collect()).unwrap_or_default()
}

/// Text of an `<si>` or `<is>` element, skipping phonetic runs.
fn string_item(si: &Node) -> String {
    let mut out = String::new();
    for c in &si.children {
        match c.name.as_str() {
            "t" => out.push_str(&c.text),
            "r" => {
                if let Some(t) = c.child("t") {
                    out.push_str(&t.text);
                }
            }
            _ => {}
        }
    }
    out
}

/// Expands a space-separated `sqref` into coordinates, capped.
fn expand_sqref(sqref: &str) -> Vec<Coord> {
    let mut out = Vec::new();
    for piece in sqref.split_whitespace() {
        let (a, b) = match piece.split_once(':') {
            Some((a, b)) => (parse_a1(a), parse_a1(b)),
            None => (parse_a1(piece), parse_a1(piece)),
        };
        let (Ok(a), Ok(b)) = (a, b) else { continue };
        for row in a.row.min(b.row)..=a.row.max(b.row) {
            for col in a.col.min(b.col)..=a.col.max(b.col) {
                if out.len() as u64 >= MAX_VALIDATION_CELLS {
                    return out;
                }
                out.push(Coord { col, row });
            }
        }
    }
    out
}

fn numeric_formula(node: &Node, name: &str) -> Option<Rational> {
    node.child(name).and_then(|f| parse_decimal(f.text.trim()))
}

fn read_validation(dv: &Node) -> ValidationRule {
    let operator = dv.attr("operator").unwrap_or("between");
    let f1 = numeric_formula(dv, "formula1");
    let f2 = numeric_formula(dv, "formula2");
    let custom = ValidationRule { kind: ValidationKind::CustomPredicate, bounds: None };
    match dv.attr("type").unwrap_or("none") {
        kind @ ("whole" | "decimal") => {
            let kind = if kind == "whole" { ValidationKind::WholeNumberRange } else { ValidationKind::DecimalRange };
            match (operator, f1, f2) {
                ("between", Some(low), Some(high)) if low <= high => ValidationRule::range(kind, low, high),
                ("equal", Some(x), _) => ValidationRule::range(kind, x.clone(), x),
                _ => custom,
            }
        }
        "list" => ValidationRule { kind: ValidationKind::List, bounds: None },
        "textLength" if operator == "greaterThan" && f1 == Some(int(0)) => ValidationRule::non_blank(),
        _ => custom,
    }
}

fn read_sheet(part: &str, node: &Node, name: &str, strings: &[String], styles: &[Style]) -> Result<Sheet, XlsxError> {
    let content_err = |message: String| XlsxError::Content { part: part.to_string(), message };
    let mut sheet = Sheet::new(name);
    let mut shared: HashMap<String, (Coord, String)> = HashMap::new();
    if let Some(data) = node.child("sheetData") {
        let mut next_row = 1u32;
        for row in data.children_named("row") {
            let row_no = match row.attr("r") {
                Some(r) => r.parse().map_err(|_| content_err(format!("bad row number {r:?}")))?,
                None => next_row,
            };
            next_row = row_no + 1;
            let mut next_col = 1u32;
            for c in row.children_named("c") {
                let coord = match c.attr("r") {
                    Some(r) => parse_a1(r).map_err(|e| content_err(e.to_string()))?,
                    None => Coord::new(next_col, row_no).map_err(|e| content_err(e.to_string()))?,
                };
                next_col = coord.col + 1;
                let mut cell = CellContent::default();
                if let Some(style) = c.attr("s").and_then(|s| s.parse::<usize>().ok()) {
                    if let Some(style) = styles.get(style) {
                        cell.format = style.format.clone();
                        cell.locked = style.locked;
                    }
                }
                if let Some(f) = c.child("f") {
                    let text = f.text.clone();
                    let formula = if f.attr("t") == Some("shared") {
                        let si = f.attr("si").unwrap_or_default().to_string();
                        if !text.trim().is_empty() {
                            shared.insert(si, (coord, text.clone()));
                            text
                        } else {
                            let (origin, master) = shared
                                .get(&si)
                                .ok_or_else(|| content_err(format!("shared formula {si} used before definition")))?;
                            shift_references(
                                master,
                                i64::from(coord.col) - i64::from(origin.col),
                                i64::from(coord.row) - i64::from(origin.row),
                            )
                            .ok_or_else(|| content_err(format!("cannot expand shared formula at {coord}")))?
                        }
                    } else {
                        text
                    };
                    cell.formula = Some(formula.strip_prefix('=').unwrap_or(&formula).to_string());
                } else {
                    let value = c.child("v").map(|v| v.text.as_str());
                    cell.literal = match (c.attr("t").unwrap_or("n"), value) {
                        ("inlineStr", _) => Literal::Text(c.child("is").map(string_item).unwrap_or_default()),
                        (_, None) => Literal::Blank,
                        ("s", Some(v)) => {
                            let idx: usize =
                                v.trim().parse().map_err(|_| content_err(format!("bad string index {v:?}")))?;
                            Literal::Text(
                                strings
                                    .get(idx)
                                    .cloned()
                                    .ok_or_else(|| content_err(format!("string index {idx} out of range")))?,
                            )
                        }
                        ("b", Some(v)) => Literal::Bool(v.trim() == "1"),
                        ("str" | "e", Some(v)) => Literal::Text(v.to_string()),
                        (_, Some(v)) => match parse_decimal(v.trim()) {
                            Some(n) => Literal::Number(n),
                            None => Literal::Text(v.to_string()),
                        },
                    };
                }
                sheet.cells.insert(coord, cell);
            }
        }
    }
    if let Some(p) = node.child("sheetProtection") {
        sheet.protected = !matches!(p.attr("sheet"), Some("0" | "false"));
    }
    if let Some(dvs) = node.child("dataValidations") {
        for dv in dvs.children_named("dataValidation") {
            let rule = read_validation(dv);
            for coord in expand_sqref(dv.attr("sqref").unwrap_or_default()) {
                sheet.cells.entry(coord).or_default().validation = Some(rule.clone());
            }
        }
    }
    Ok(sheet)
}

fn resolve_target(target: &str) -> String {
    let target = target.trim_start_matches('/');
    if target.starts_with("xl/") {
        target.to_string()
    } else {
        format!("xl/{target}")
    }
}

/// Splits `'Sheet 1'!$A$1:$B$2` into an optional sheet and the local part.
fn split_sheet_prefix(text: &str) -> (Option<String>, &str) {
    let Some(bang) = text.rfind('!') else { return (None, text) };
    let (sheet, rest) = (&text[..bang], &text[bang + 1..]);
    let sheet = match sheet.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')) {
        Some(quoted) => quoted.replace("''", "'"),
        None => sheet.to_string(),
    };
    (Some(sheet), rest)
}

fn read_package<R: Read + std::io::Seek>(mut pkg: Package<R>) -> Result<Workbook, XlsxError> {
    let workbook = pkg.required("xl/workbook.xml")?;
    let rels = pkg.xml("xl/_rels/workbook.xml.rels")?;
    let targets: HashMap<String, String> = rels
        .iter()
        .flat_map(|r| r.children_named("Relationship"))
        .filter_map(|r| Some((r.attr("Id")?.to_string(), resolve_target(r.attr("Target")?))))
        .collect();
    let strings = read_shared_strings(pkg.xml("xl/sharedStrings.xml")?);
    let styles = read_styles(pkg.xml("xl/styles.xml")?);

    let sheet_nodes: Vec<&Node> =
        workbook.child("sheets").map(|s| s.children_named("sheet").collect()).unwrap_or_default();
    let mut sheets = Vec::new();
    for (i, s) in sheet_nodes.iter().enumerate() {
        let name = s.attr("name").ok_or_else(|| XlsxError::Content {
            part: "xl/workbook.xml".into(),
            message: "sheet without a name".into(),
        })?;
        let part = s
            .attr("id")
            .and_then(|id| targets.get(id).cloned())
            .unwrap_or_else(|| format!("xl/worksheets/sheet{}.xml", i + 1));
        let node = pkg.required(&part)?;
        sheets.push(read_sheet(&part, &node, name, &strings, &styles)?);
    }

    if let Some(names) = workbook.child("definedNames") {
        for dn in names.children_named("definedName") {
            let Some(name) = dn.attr("name") else { continue };
            if name.starts_with("_xlnm.") {
                continue;
            }
            let (prefix, local) = split_sheet_prefix(dn.text.trim());
            let Some(target) = NameTarget::parse(local) else { continue };
            let owner = match dn.attr("localSheetId").and_then(|v| v.parse::<usize>().ok()) {
                Some(idx) => sheets.get_mut(idx),
                None => {
                    let prefix = prefix.unwrap_or_default();
                    sheets.iter_mut().find(|s| s.name.eq_ignore_ascii_case(&prefix))
                }
            };
            if let Some(sheet) = owner {
                sheet.define_name(name, target)?;
            }
        }
    }
    Ok(Workbook::new(sheets)?)
}

/// Reads a workbook from XLSX bytes.
pub fn read_xlsx_bytes(bytes: &[u8]) -> Result<Workbook, XlsxError> {
    let zip = ZipArchive::new(Cursor::new(bytes)).map_err(|e| XlsxError::NotZip(e.to_string()))?;
    read_package(Package { zip })
}

pub fn read_xlsx(path: impl AsRef<Path>) -> Result<Workbook, XlsxError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| XlsxError::Io { path: path.display().to_string(), source })?;
    let mut wb = read_xlsx_bytes(&bytes)?;
    wb.source_path = Some(path.display().to_string());
    Ok(wb)
}

// ---------------------------------------------------------------------------
// Writing

/// Style table built while writing; index 0 is the default style.
struct StyleTable {
    custom_formats: Vec<(u32, String)>,
    xfs: Vec<(u32, bool)>,
}

impl StyleTable {
    fn new() -> Self {
        StyleTable { custom_formats: Vec::new(), xfs: vec![(0, true)] }
    }

    fn format_id(&mut self, format: &NumberFormat) -> u32 {
        match format.pattern() {
            "General" => 0,
            "0" => 1,
            "0.00" => 2,
            pattern => {
                if let Some(id) = pattern.strip_prefix("numFmtId:").and_then(|n| n.parse().ok()) {
                    return id;
                }
                if let Some((id, _)) = self.custom_formats.iter().find(|(_, p)| p == pattern) {
                    return *id;
                }
                let id = FIRST_CUSTOM_FORMAT + self.custom_formats.len() as u32;
                self.custom_formats.push((id, pattern.to_string()));
                id
            }
        }
    }

    fn index(&mut self, cell: &CellContent) -> usize {
        let key = (self.format_id(&cell.format), cell.locked);
        match self.xfs.iter().position(|x| *x == key) {
            Some(i) => i,
            None => {
                self.xfs.push(key);
                self.xfs.len() - 1
            }
        }
    }

    fn to_xml(&self) -> String {
        let mut out = String::from(XML_DECL);
        out.push_str(r#"<styleSheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main">"#);
        if !self.custom_formats.is_empty() {
            out.push_str(&format!(r#"<numFmts count="{}">"#, self.custom_formats.len()));
            for (id, code) in &self.custom_formats {
                out.push_str(&format!(r#"<numFmt numFmtId="{id}" formatCode="{}"/>"#, escape(code.as_str())));
            }
            out.push_str("</numFmts>");
        }
        out.push_str(concat!(
            r#"<fonts count="1"><font><sz val="11"/><name val="Calibri"/></font></fonts>"#,
            r#"<fills count="2"><fill><patternFill patternType="none"/></fill><fill><patternFill patternType="gray125"/></fill></fills>"#,
            r#"<borders count="1"><border><left/><right/><top/><bottom/><diagonal/></border></borders>"#,
            r#"<cellStyleXfs count="1"><xf numFmtId="0" fontId="0" fillId="0" borderId="0"/></cellStyleXfs>"#,
        ));
        out.push_str(&format!(r#"<cellXfs count="{}">"#, self.xfs.len()));
        for (id, locked) in &self.xfs {
            let apply_fmt = if *id != 0 { r#" applyNumberFormat="1""# } else { "" };
            if *locked {
                out.push_str(&format!(
                    r#"<xf numFmtId="{id}" fontId="0" fillId="0" borderId="0" xfId="0"{apply_fmt}/>"#
                ));
            } else {
                out.push_str(&format!(
                    r#"<xf numFmtId="{id}" fontId="0" fillId="0" borderId="0" xfId="0"{apply_fmt} applyProtection="1"><protection locked="0"/></xf>"#
                ));
            }
        }
        out.push_str("</cellXfs></styleSheet>");
        out
    }
}

#[derive(Default)]
struct SharedStrings {
    list: Vec<String>,
    index: HashMap<String, usize>,
}

impl SharedStrings {
    fn intern(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        self.list.push(s.to_string());
        self.index.insert(s.to_string(), self.list.len() - 1);
        self.list.len() - 1
    }

    fn to_xml(&self) -> String {
        let mut out = String::from(XML_DECL);
        out.push_str(&format!(
            r#"<sst xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" count="{0}" uniqueCount="{0}">"#,
            self.list.len()
        ));
        for s in &self.list {
            out.push_str("<si>");
            out.push_str(&text_element(s));
            out.push_str("</si>");
        }
        out.push_str("</sst>");
        out
    }
}

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n";

fn text_element(s: &str) -> String {
    let preserve = s.starts_with(char::is_whitespace) || s.ends_with(char::is_whitespace);
    let space = if preserve { r#" xml:space="preserve""# } else { "" };
    format!("<t{space}>{}</t>", escape(s))
}

/// Numeric cell text. Non-terminating rationals cannot be written exactly
/// and are rounded to 15 significant digits.
fn number_text(value: &Rational) -> String {
    if is_terminating(value) {
        to_exact_string(value)
    } else {
        format_general(value)
    }
}

fn validation_xml(rule: &ValidationRule, sqref: &str) -> String {
    let bounds = |kind: &str| {
        let (low, high) = rule.bounds.clone().unwrap_or((int(0), int(0)));
        format!(
            r#"<dataValidation type="{kind}" operator="between" allowBlank="1" showErrorMessage="1" sqref="{sqref}"><formula1>{}</formula1><formula2>{}</formula2></dataValidation>"#,
            number_text(&low),
            number_text(&high)
        )
    };
    match rule.kind {
        ValidationKind::WholeNumberRange => bounds("whole"),
        ValidationKind::DecimalRange => bounds("decimal"),
        ValidationKind::List => format!(
            r#"<dataValidation type="list" allowBlank="1" showErrorMessage="1" sqref="{sqref}"><formula1>"&quot;&quot;"</formula1></dataValidation>"#
        ),
        ValidationKind::NonBlankOnly => format!(
            r#"<dataValidation type="textLength" operator="greaterThan" allowBlank="0" showErrorMessage="1" sqref="{sqref}"><formula1>0</formula1></dataValidation>"#
        ),
        ValidationKind::CustomPredicate => format!(
            r#"<dataValidation type="custom" allowBlank="1" showErrorMessage="1" sqref="{sqref}"><formula1>TRUE</formula1></dataValidation>"#
        ),
    }
}

fn sheet_xml(sheet: &Sheet, styles: &mut StyleTable, strings: &mut SharedStrings) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str(r#"<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">"#);
    out.push_str("<sheetData>");
    let mut rows: BTreeMap<u32, Vec<(Coord, &CellContent)>> = BTreeMap::new();
    for (coord, cell) in &sheet.cells {
        rows.entry(coord.row).or_default().push((*coord, cell));
    }
    for (row, cells) in rows {
        out.push_str(&format!(r#"<row r="{row}">"#));
        for (coord, cell) in cells {
            let style = styles.index(cell);
            let s = if style != 0 { format!(r#" s="{style}""#) } else { String::new() };
            let r = coord.to_a1();
            if let Some(f) = &cell.formula {
                out.push_str(&format!(r#"<c r="{r}"{s}><f>{}</f></c>"#, escape(f.as_str())));
                continue;
            }
            match &cell.literal {
                Literal::Blank => out.push_str(&format!(r#"<c r="{r}"{s}/>"#)),
                Literal::Number(n) => out.push_str(&format!(r#"<c r="{r}"{s}><v>{}</v></c>"#, number_text(n))),
                Literal::Bool(b) => out.push_str(&format!(r#"<c r="{r}"{s} t="b"><v>{}</v></c>"#, u8::from(*b))),
                Literal::Text(t) => {
                    out.push_str(&format!(r#"<c r="{r}"{s} t="s"><v>{}</v></c>"#, strings.intern(t)));
                }
            }
        }
        out.push_str("</row>");
    }
    out.push_str("</sheetData>");
    if sheet.protected {
        out.push_str(r#"<sheetProtection sheet="1" objects="1" scenarios="1"/>"#);
    }
    let validated: Vec<_> =
        sheet.cells.iter().filter_map(|(c, cell)| cell.validation.as_ref().map(|v| (c, v))).collect();
    if !validated.is_empty() {
        out.push_str(&format!(r#"<dataValidations count="{}">"#, validated.len()));
        for (coord, rule) in validated {
            out.push_str(&validation_xml(rule, &coord.to_a1()));
        }
        out.push_str("</dataValidations>");
    }
    out.push_str("</worksheet>");
    out
}

fn absolute(coord: Coord) -> String {
    format!("${}${}", crate::address::column_name(coord.col), coord.row)
}

fn workbook_xml(wb: &Workbook) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str(r#"<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships"><sheets>"#);
    for (i, sheet) in wb.sheets.iter().enumerate() {
        out.push_str(&format!(
            r#"<sheet name="{}" sheetId="{}" r:id="rId{}"/>"#,
            escape(sheet.name.as_str()),
            i + 1,
            i + 1
        ));
    }
    out.push_str("</sheets>");
    let any_names = wb.sheets.iter().any(|s| !s.defined_names.is_empty());
    if any_names {
        out.push_str("<definedNames>");
        for (i, sheet) in wb.sheets.iter().enumerate() {
            for (name, target) in &sheet.defined_names {
                let local = match target {
                    NameTarget::Cell(c) => absolute(*c),
                    NameTarget::Range(a, b) => format!("{}:{}", absolute(*a), absolute(*b)),
                };
                let text = format!("{}!{local}", quote_sheet_name(&sheet.name));
                out.push_str(&format!(
                    r#"<definedName name="{}" localSheetId="{i}">{}</definedName>"#,
                    escape(name.as_str()),
                    escape(text.as_str())
                ));
            }
        }
        out.push_str("</definedNames>");
    }
    out.push_str("</workbook>");
    out
}

fn content_types(sheet_count: usize) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str(concat!(
        r#"<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">"#,
        r#"<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>"#,
        r#"<Default Extension="xml" ContentType="application/xml"/>"#,
        r#"<Override PartName="/xl/workbook.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>"#,
        r#"<Override PartName="/xl/styles.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.styles+xml"/>"#,
        r#"<Override PartName="/xl/sharedStrings.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml"/>"#,
    ));
    for i in 1..=sheet_count {
        out.push_str(&format!(
            r#"<Override PartName="/xl/worksheets/sheet{i}.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>"#
        ));
    }
    out.push_str("</Types>");
    out
}

const ROOT_RELS: &str = concat!(
    "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
    r#"<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">"#,
    r#"<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="xl/workbook.xml"/>"#,
    "</Relationships>"
);

fn workbook_rels(sheet_count: usize) -> String {
    let mut out = String::from(XML_DECL);
    out.push_str(r#"<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">"#);
    for i in 1..=sheet_count {
        out.push_str(&format!(
            r#"<Relationship Id="rId{i}" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" Target="worksheets/sheet{i}.xml"/>"#
        ));
    }
    let n = sheet_count;
    out.push_str(&format!(
        r#"<Relationship Id="rId{}" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/styles" Target="styles.xml"/>"#,
        n + 1
    ));
    out.push_str(&format!(
        r#"<Relationship Id="rId{}" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings" Target="sharedStrings.xml"/>"#,
        n + 2
    ));
    out.push_str("</Relationships>");
    out
}

/// Serializes a workbook to XLSX bytes. Output is deterministic: entries
/// carry a fixed timestamp.
pub fn write_xlsx_bytes(wb: &Workbook) -> Result<Vec<u8>, XlsxError> {
    wb.validate()?;
    let mut styles = StyleTable::new();
    let mut strings = SharedStrings::default();
    let sheet_parts: Vec<String> = wb.sheets.iter().map(|s| sheet_xml(s, &mut styles, &mut strings)).collect();

    let mut parts: Vec<(String, String)> = vec![
        ("[Content_Types].xml".into(), content_types(wb.sheets.len())),
        ("_rels/.rels".into(), ROOT_RELS.to_string()),
        ("xl/workbook.xml".into(), workbook_xml(wb)),
        ("xl/_rels/workbook.xml.rels".into(), workbook_rels(wb.sheets.len())),
        ("xl/styles.xml".into(), styles.to_xml()),
        ("xl/sharedStrings.xml".into(), strings.to_xml()),
    ];
    for (i, xml) in sheet_parts.into_iter().enumerate() {
        parts.push((format!("xl/worksheets/sheet{}.xml", i + 1), xml));
    }

    let io_err = |e: std::io::Error| XlsxError::Io { path: "<memory>".into(), source: e };
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(DateTime::default());
    for (name, xml) in parts {
        zip.start_file(name, options).map_err(|e| io_err(std::io::Error::other(e)))?;
        zip.write_all(xml.as_bytes()).map_err(io_err)?;
    }
    let cursor = zip.finish().map_err(|e| io_err(std::io::Error::other(e)))?;
    Ok(cursor.into_inner())
}

pub fn write_xlsx(wb: &Workbook, path: impl AsRef<Path>) -> Result<(), XlsxError> {
    let path = path.as_ref();
    let bytes = write_xlsx_bytes(wb)?;
    fs::write(path, bytes).map_err(|source| XlsxError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::ratio;

    fn one_sheet(sheet: Sheet) -> Workbook {
        Workbook::new(vec![sheet]).unwrap()
    }

    #[test]
    fn minimal_literal_round_trips() {
        let mut s = Sheet::new("S");
        s.set("A1", CellContent::number(int(5)));
        let wb = one_sheet(s);
        let back = read_xlsx_bytes(&write_xlsx_bytes(&wb).unwrap()).unwrap();
        assert_eq!(back, wb);
        assert_eq!(back.sheets[0].cells.len(), 1);
    }

    #[test]
    fn empty_sheet_round_trips() {
        let wb = one_sheet(Sheet::new("Empty"));
        assert_eq!(read_xlsx_bytes(&write_xlsx_bytes(&wb).unwrap()).unwrap(), wb);
    }

    #[test]
    fn modeled_fields_survive() {
        let mut s = Sheet::new("Dose & <Calc>").protected(true);
        s.set("A1", CellContent::text("  padded  "))
            .set("A2", CellContent::text("5"))
            .set("A3", CellContent::boolean(true))
            .set("B1", CellContent::number(ratio(2, 100)).with_format(NumberFormat::fixed(3)))
            .set("B2", CellContent::formula("=IF(B1>0.6,\"a<b\",B1)").with_format(NumberFormat::fixed(2)))
            .set(
                "C1",
                CellContent::blank().unlocked().with_validation(ValidationRule::decimal_range(ratio(1, 2), int(200))),
            )
            .set("C2", CellContent::blank().with_validation(ValidationRule::non_blank()))
            .set(
                "C3",
                CellContent::number(int(7)).with_validation(ValidationRule::range(
                    ValidationKind::WholeNumberRange,
                    int(1),
                    int(9),
                )),
            )
            .set(
                "C4",
                CellContent::blank().with_validation(ValidationRule { kind: ValidationKind::List, bounds: None }),
            )
            .set(
                "C5",
                CellContent::blank()
                    .with_validation(ValidationRule { kind: ValidationKind::CustomPredicate, bounds: None }),
            )
            .set("D1", CellContent::number(int(1)).with_format(NumberFormat::new("0.0%")));
        s.define_name("Weight", NameTarget::Cell(parse_a1("C1").unwrap())).unwrap();
        s.define_name("Block", NameTarget::Range(parse_a1("A1").unwrap(), parse_a1("B2").unwrap())).unwrap();
        let other = Sheet::new("Tom's");
        let wb = Workbook::new(vec![s, other]).unwrap();
        let back = read_xlsx_bytes(&write_xlsx_bytes(&wb).unwrap()).unwrap();
        assert_eq!(back, wb);
    }

    #[test]
    fn output_is_deterministic() {
        let mut s = Sheet::new("S");
        s.set("A1", CellContent::formula("=1+1"));
        let wb = one_sheet(s);
        assert_eq!(write_xlsx_bytes(&wb).unwrap(), write_xlsx_bytes(&wb).unwrap());
    }

    #[test]
    fn protection_flag_reads_back() {
        let wb = one_sheet(Sheet::new("P").protected(true));
        let bytes = write_xlsx_bytes(&wb).unwrap();
        assert!(read_xlsx_bytes(&bytes).unwrap().sheets[0].protected);
    }

    #[test]
    fn not_a_zip_is_reported() {
        assert!(matches!(read_xlsx_bytes(b"hello"), Err(XlsxError::NotZip(_))));
    }

    fn zip_of(parts: &[(&str, &str)]) -> Vec<u8> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, body) in parts {
            zip.start_file(*name, SimpleFileOptions::default()).unwrap();
            zip.write_all(body.as_bytes()).unwrap();
        }
        zip.finish().unwrap().into_inner()
    }

    #[test]
    fn missing_workbook_part_is_reported() {
        let bytes = zip_of(&[("xl/styles.xml", "<styleSheet/>")]);
        match read_xlsx_bytes(&bytes) {
            Err(XlsxError::MissingPart(p)) => assert_eq!(p, "xl/workbook.xml"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_xml_reports_part_and_offset() {
        let wb = r#"<workbook><sheets><sheet name="S" r:id="rId1"/></sheets></workbook>"#;
        let sheet = "<worksheet><sheetData><row r=\"1\"></sheetData></worksheet>";
        let bytes = zip_of(&[("xl/workbook.xml", wb), ("xl/worksheets/sheet1.xml", sheet)]);
        match read_xlsx_bytes(&bytes) {
            Err(XlsxError::Xml { part, offset, .. }) => {
                assert_eq!(part, "xl/worksheets/sheet1.xml");
                assert!(offset > 0 && offset as usize <= sheet.len(), "{offset}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shared_formulas_are_expanded_and_cached_values_ignored() {
        let wb = r#"<workbook><sheets><sheet name="S"/></sheets></workbook>"#;
        let sheet = concat!(
            r#"<worksheet><sheetData>"#,
            r#"<row r="1"><c r="B1"><f t="shared" ref="B1:B3" si="0">A1*2</f><v>0</v></c></row>"#,
            r#"<row r="2"><c r="B2"><f t="shared" si="0"/><v>9</v></c></row>"#,
            r#"<row r="3"><c r="B3"><f t="shared" si="0"/></c><c r="C3" t="inlineStr"><is><t>x &amp; y</t></is></c></row>"#,
            r#"</sheetData><sheetProtection sheet="1"/></worksheet>"#
        );
        let bytes = zip_of(&[("xl/workbook.xml", wb), ("xl/worksheets/sheet1.xml", sheet)]);
        let wb = read_xlsx_bytes(&bytes).unwrap();
        let s = &wb.sheets[0];
        assert_eq!(s.get_a1("B2").unwrap().formula.as_deref(), Some("A2*2"));
        assert_eq!(s.get_a1("B3").unwrap().formula.as_deref(), Some("A3*2"));
        assert!(s.get_a1("B2").unwrap().literal.is_blank());
        assert_eq!(s.get_a1("C3").unwrap().literal, Literal::Text("x & y".into()));
        assert!(s.protected);
    }

    #[test]
    fn validation_ranges_expand_over_sqref() {
        let wb = r#"<workbook><sheets><sheet name="S"/></sheets></workbook>"#;
        let sheet = concat!(
            r#"<worksheet><sheetData/><dataValidations count="1">"#,
            r#"<dataValidation type="decimal" sqref="A1:A3 C2"><formula1>0.5</formula1><formula2>200</formula2></dataValidation>"#,
            r#"<dataValidation type="whole" operator="lessThan" sqref="D1"><formula1>5</formula1></dataValidation>"#,
            r#"</dataValidations></worksheet>"#
        );
        let bytes = zip_of(&[("xl/workbook.xml", wb), ("xl/worksheets/sheet1.xml", sheet)]);
        let s = read_xlsx_bytes(&bytes).unwrap().sheets.remove(0);
        let expected = ValidationRule::decimal_range(ratio(1, 2), int(200));
        for a in ["A1", "A2", "A3", "C2"] {
            assert_eq!(s.get_a1(a).unwrap().validation.as_ref(), Some(&expected), "{a}");
        }
        assert_eq!(s.get_a1("D1").unwrap().validation.as_ref().unwrap().kind, ValidationKind::CustomPredicate);
    }

    #[test]
    fn numbers_read_exactly() {
        let mut s = Sheet::new("S");
        s.set("A1", CellContent::number(ratio(2, 100)));
        let back = read_xlsx_bytes(&write_xlsx_bytes(&one_sheet(s)).unwrap()).unwrap();
        assert_eq!(back.sheets[0].get_a1("A1").unwrap().literal, Literal::Number(ratio(1, 50)));
    }
}
