use crate::address::{CellAddress, Coord};
use crate::formula::{canonicalize, parse_formula};
use crate::number::{format_general, Rational};
use crate::workbook::{CellContent, ValidationKind, ValidationRule, Workbook};

use super::{sort_findings, Finding, RuleId, Severity};

/// Cell-by-cell comparison of two versions of a workbook. Cells are matched
/// by address; sheets by case-insensitive name.
pub fn diff_workbooks(old: &Workbook, new: &Workbook) -> Vec<Finding> {
    let mut out = Vec::new();
    let a1 = Coord { col: 1, row: 1 };
    for sheet in &old.sheets {
        if new.sheet(&sheet.name).is_none() {
            out.push(
                Finding::new(
                    RuleId::D0,
                    Severity::Warn,
                    vec![CellAddress::new(sheet.name.clone(), a1)],
                    format!("sheet '{}' is missing from the new version", sheet.name),
                )
                .with("sheet", &sheet.name),
            );
        }
    }
    for sheet in &new.sheets {
        if old.sheet(&sheet.name).is_none() {
            out.push(
                Finding::new(
                    RuleId::D0,
                    Severity::Warn,
                    vec![CellAddress::new(sheet.name.clone(), a1)],
                    format!("sheet '{}' is new", sheet.name),
                )
                .with("sheet", &sheet.name),
            );
        }
    }

    for (addr, before) in old.cells() {
        let Some(new_sheet) = new.sheet(&addr.sheet) else { continue };
        let after = new_sheet.get(addr.coord());
        let blank = CellContent::blank();
        let after_content = after.unwrap_or(&blank);
        if let Some(old_formula) = &before.formula {
            match &after_content.formula {
                None => out.push(overwritten(&addr, old_formula, after_content)),
                Some(new_formula) => out.extend(changed(&addr, old_formula, new_formula)),
            }
        }
        if let Some(old_rule) = &before.validation {
            if let Some(why) = weakened(old_rule, after_content.validation.as_ref()) {
                out.push(
                    Finding::new(RuleId::D3, Severity::Warn, vec![addr.clone()], format!("validation {why}"))
                        .with("old", describe(Some(old_rule)))
                        .with("new", describe(after_content.validation.as_ref())),
                );
            }
        }
    }
    sort_findings(new, &mut out);
    out
}

fn overwritten(addr: &CellAddress, old_formula: &str, after: &CellContent) -> Finding {
    let replacement = match &after.literal {
        crate::workbook::Literal::Number(n) => format_general(n),
        crate::workbook::Literal::Text(t) => format!("{t:?}"),
        crate::workbook::Literal::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        crate::workbook::Literal::Blank => "blank".to_string(),
    };
    Finding::new(RuleId::D1, Severity::High, vec![addr.clone()], format!("formula replaced by {replacement}"))
        .with("old", format!("={old_formula}"))
        .with("new", replacement)
}

/// Numeric literals of a formula as (value, text), sorted by value.
fn literals(text: &str) -> Option<Vec<(Rational, String)>> {
    let ast = parse_formula(text).ok()?;
    let mut out: Vec<(Rational, String)> =
        ast.number_literals().into_iter().map(|(v, t)| (v.clone(), t.to_string())).collect();
    out.sort();
    Some(out)
}

/// Entries of `a` not matched (by value) in `b`, as multisets.
fn missing_from(a: &[(Rational, String)], b: &[(Rational, String)]) -> Vec<String> {
    let mut rest: Vec<&Rational> = b.iter().map(|(v, _)| v).collect();
    let mut out = Vec::new();
    for (v, t) in a {
        match rest.iter().position(|r| *r == v) {
            Some(i) => {
                rest.remove(i);
            }
            None => out.push(t.clone()),
        }
    }
    out
}

fn changed(addr: &CellAddress, old: &str, new: &str) -> Option<Finding> {
    let canon = |t: &str| canonicalize(&format!("={t}")).unwrap_or_else(|| t.to_string());
    if canon(old) == canon(new) {
        return None;
    }
    let base = |severity, message: String| {
        Finding::new(RuleId::D2, severity, vec![addr.clone()], message)
            .with("old_formula", format!("={old}"))
            .with("new_formula", format!("={new}"))
    };
    if let (Some(a), Some(b)) = (literals(old), literals(new)) {
        let (gone, added) = (missing_from(&a, &b), missing_from(&b, &a));
        if gone.is_empty() && added.is_empty() {
            return Some(base(Severity::Info, "formula changed; its constants are unchanged".into()));
        }
        let (gone, added) = (gone.join(", "), added.join(", "));
        return Some(
            base(Severity::High, format!("constants changed from [{gone}] to [{added}]"))
                .with("old", gone)
                .with("new", added),
        );
    }
    Some(base(Severity::High, "formula changed and could not be compared".into()))
}

fn rank(rule: Option<&ValidationRule>) -> u8 {
    match rule.map(|r| r.kind) {
        None => 0,
        Some(ValidationKind::NonBlankOnly) => 1,
        Some(ValidationKind::List | ValidationKind::CustomPredicate) => 2,
        Some(ValidationKind::WholeNumberRange | ValidationKind::DecimalRange) => 3,
    }
}

fn describe(rule: Option<&ValidationRule>) -> String {
    match rule {
        None => "none".into(),
        Some(ValidationRule { kind, bounds: Some((lo, hi)) }) => {
            format!("{} [{}, {}]", kind.as_str(), format_general(lo), format_general(hi))
        }
        Some(r) => r.kind.as_str().into(),
    }
}

/// Why `new` accepts more than `old`, if it does.
fn weakened(old: &ValidationRule, new: Option<&ValidationRule>) -> Option<&'static str> {
    let Some(new) = new else { return Some("removed") };
    if rank(Some(new)) < rank(Some(old)) {
        return Some("replaced by a weaker kind");
    }
    if old.kind == ValidationKind::WholeNumberRange && new.kind == ValidationKind::DecimalRange {
        return Some("now accepts fractions");
    }
    if let (Some((lo0, hi0)), Some((lo1, hi1))) = (&old.bounds, &new.bounds) {
        if old.kind.is_range() && new.kind.is_range() && (lo1 < lo0 || hi1 > hi0) {
            return Some("range widened");
        }
    }
    None
}
