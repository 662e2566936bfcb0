use super::{published, synthesized, FixtureSpec};
use crate::number::{int, parse_decimal, ratio};
use crate::workbook::{CellContent, NumberFormat, Sheet, ValidationKind, ValidationRule, Workbook};

pub const DOSE_SHEET: &str = "Calculator";
pub const WEIGHT_CELL: &str = "E19";
pub const BSA_CELL: &str = "E25";
pub const ATROPINE_FORMULA: &str = "=IF(E19*0.02>0.6,0.6,IF(E19*0.02<0.1,0.1,E19*0.02))";

/// One row of the pre-operative dose table (columns I to L).
#[derive(Debug, Clone, Copy)]
pub struct DoseRow {
    pub row: u32,
    pub drug: &'static str,
    pub route: &'static str,
    pub label: &'static str,
    /// Decimal places shown in column L.
    pub decimals: u32,
    /// Column L formula in the audited workbook.
    pub formula: &'static str,
    /// Rate in mg/kg and optional bounds in mg, used by the clean variant.
    pub rate_mg: &'static str,
    pub min_mg: Option<&'static str>,
    pub max_mg: Option<&'static str>,
}

const fn row(
    row: u32,
    drug: &'static str,
    route: &'static str,
    label: &'static str,
    decimals: u32,
    formula: &'static str,
    rate_mg: &'static str,
) -> DoseRow {
    DoseRow { row, drug, route, label, decimals, formula, rate_mg, min_mg: None, max_mg: None }
}

pub const DOSE_ROWS: [DoseRow; 13] = [
    DoseRow {
        min_mg: Some("0.1"),
        max_mg: Some("0.6"),
        ..row(6, "Atropine", "IM", "0.02 mg/kg", 2, "=IF(E19*0.02>0.6,0.6,IF(E19*0.02<0.1,0.1,E19*0.02))", "0.02")
    },
    DoseRow {
        min_mg: Some("0.1"),
        max_mg: Some("0.6"),
        ..row(7, "Atropine", "IV", "0.01 mg/kg", 2, ATROPINE_FORMULA, "0.01")
    },
    row(8, "Cimetidine", "PO/Slow IV", "7.5 mg/kg", 1, "=E19*7.5", "7.5"),
    row(9, "Clonidine", "PO", "4 mcg/kg", 3, "=E19*0.004", "0.004"),
    row(10, "Glycopyrrolate", "IV/IM", "0.01 mg/kg", 2, "=E19*0.01", "0.01"),
    row(11, "Ketamine Stun", "IM", "5 mg/kg", 1, "=E19*5", "5"),
    row(12, "Metoclopramide", "IV", "0.1 mg/kg", 1, "=E19*0.1", "0.1"),
    row(13, "Midazolam", "IV", "0.05 mg/kg", 2, "=E19*0.05", "0.05"),
    row(14, "Midazolam", "PO", "0.5 mg/kg", 1, "=E19*0.5", "0.5"),
    row(15, "Midazolam", "IM", "0.08 mg/kg", 2, "=E19*0.08", "0.08"),
    row(16, "Midazolam", "Nasal", "0.3 mg/kg", 1, "=E19*0.3", "0.3"),
    row(17, "Morphine", "IM", "0.1 mg/kg", 1, "=E19*0.1", "0.1"),
    DoseRow {
        max_mg: Some("50"),
        ..row(18, "Ranitidine", "IV (up to 50 mg)", "1 mg/kg", 1, "=IF(E19*1>50,50,E19*1)", "1")
    },
];

/// Patient data entry fields in D17:E23.
const ENTRY_FIELDS: [(u32, &str, ValidationKind, i64, i64); 7] = [
    (17, "Age (years)", ValidationKind::WholeNumberRange, 0, 18),
    (18, "Height (cm)", ValidationKind::DecimalRange, 30, 200),
    (19, "Weight (kg)", ValidationKind::DecimalRange, 1, 150),
    (20, "Hours NPO", ValidationKind::DecimalRange, 0, 24),
    (21, "Respiratory rate (/min)", ValidationKind::WholeNumberRange, 5, 80),
    (22, "Hematocrit (%)", ValidationKind::DecimalRange, 10, 70),
    (23, "Minimum allowable hematocrit (%)", ValidationKind::DecimalRange, 10, 70),
];

fn a1(col: &str, row: u32) -> String {
    format!("{col}{row}")
}

fn table_labels(sheet: &mut Sheet, clean: bool) {
    let mark = if clean { synthesized } else { published };
    sheet.set("I5", mark(CellContent::text("Pre-operative")));
    sheet.set("L5", mark(CellContent::text("mg")));
    for r in &DOSE_ROWS {
        let label = if clean && r.label.contains("mcg") { format!("{} mg/kg", r.rate_mg) } else { r.label.to_string() };
        sheet.set(&a1("I", r.row), mark(CellContent::text(r.drug)));
        sheet.set(&a1("J", r.row), mark(CellContent::text(r.route)));
        sheet.set(&a1("K", r.row), synthesized_if(clean || label != r.label, CellContent::text(label)));
    }
}

fn synthesized_if(cond: bool, c: CellContent) -> CellContent {
    if cond {
        synthesized(c)
    } else {
        published(c)
    }
}

fn entry_block(sheet: &mut Sheet, clean: bool) {
    sheet.set("D16", synthesized(CellContent::text("Patient data")));
    for (row, label, kind, lo, hi) in ENTRY_FIELDS {
        sheet.set(&a1("D", row), synthesized(CellContent::text(label)));
        let mut cell = CellContent::blank().unlocked();
        if clean {
            let lo = if row == 19 { ratio(1, 2) } else { int(lo) };
            cell = cell.with_validation(ValidationRule::range(kind, lo, int(hi)));
        } else if row != 19 {
            cell = cell.with_validation(ValidationRule::non_blank());
        }
        sheet.set(&a1("E", row), synthesized(cell));
    }
}

/// The audited pre-operative calculator: the printed dose table with its
/// atropine formula, a patient data entry block, and a few derived values
/// including an unused body-surface-area formula. The sheet is protected
/// and there is no documentation sheet.
pub fn gen_pediatric(spec: &FixtureSpec) -> Workbook {
    let mut sheet = Sheet::new(DOSE_SHEET).protected(true);
    entry_block(&mut sheet, false);
    table_labels(&mut sheet, false);
    for r in &DOSE_ROWS {
        let cell = CellContent::formula(r.formula).with_format(NumberFormat::fixed(r.decimals));
        let cell = if r.formula == ATROPINE_FORMULA && r.row == 7 {
            published(cell)
        } else {
            synthesized(cell)
                .with_meta("note", "formula built from the row's label rate; constants and bounds are invented")
        };
        sheet.set(&a1("L", r.row), cell);
    }

    let derived: [(u32, &str, &str, u32); 5] = [
        (25, "Body surface area (m2)", "=(4*E19+7)/(E19+90)", 2),
        (26, "Tube size (uncuffed)", "=E17/4+4", 1),
        (27, "Maintenance fluid (mL/h)", "=IF(E19>20,60+(E19-20),IF(E19>10,40+2*(E19-10),4*E19))", 0),
        (28, "Fluid deficit (mL)", "=E27*E20", 0),
        (29, "Allowable blood loss (mL)", "=E19*70*(E22-E23)/E22", 0),
    ];
    for (row, label, formula, decimals) in derived {
        if row == 25 && !spec.include_bsa {
            continue;
        }
        sheet.set(&a1("D", row), synthesized(CellContent::text(label)));
        sheet.set(&a1("E", row), synthesized(CellContent::formula(formula).with_format(NumberFormat::fixed(decimals))));
    }
    Workbook::new(vec![sheet]).expect("fixture layout is valid")
}

/// The same calculator built to pass every rule: documented, with
/// validated inputs, constants held in labelled cells, consistent units, a
/// blank result until a weight is entered, and no orphaned formulas.
pub fn gen_clean_pediatric(_spec: &FixtureSpec) -> Workbook {
    let mut docs = Sheet::new("Instructions");
    let lines = [
        "Pre-operative dose calculator",
        "Enter the patient's weight in kilograms in Calculator!E19. Doses stay blank until a weight is entered.",
        "Doses in Calculator!L6:L18 are in mg: weight times the rate in column M, limited to the bounds in columns N and O.",
        "Rates and bounds must be checked against the local formulary before use.",
        "Calculator!L20 counts the doses calculated.",
    ];
    for (i, line) in lines.iter().enumerate() {
        docs.set(&a1("A", i as u32 + 1), synthesized(CellContent::text(*line)));
    }

    let mut sheet = Sheet::new(DOSE_SHEET).protected(true);
    entry_block(&mut sheet, true);
    table_labels(&mut sheet, true);
    sheet.set("M5", synthesized(CellContent::text("Rate (mg/kg)")));
    sheet.set("N5", synthesized(CellContent::text("Minimum (mg)")));
    sheet.set("O5", synthesized(CellContent::text("Maximum (mg)")));
    let number = |text: &str| synthesized(CellContent::number(parse_decimal(text).expect("decimal constant")));
    for r in &DOSE_ROWS {
        let n = r.row;
        sheet.set(&a1("M", n), number(r.rate_mg));
        let mut dose = format!("E19*M{n}");
        if let Some(max) = r.max_mg {
            sheet.set(&a1("O", n), number(max));
            dose = format!("MIN(O{n},{dose})");
        }
        if let Some(min) = r.min_mg {
            sheet.set(&a1("N", n), number(min));
            dose = format!("MAX(N{n},{dose})");
        }
        let formula = format!("=IF(ISBLANK(E19),\"\",{dose})");
        sheet
            .set(&a1("L", n), synthesized(CellContent::formula(&formula).with_format(NumberFormat::fixed(r.decimals))));
    }
    sheet.set("K20", synthesized(CellContent::text("Doses calculated")));
    sheet.set("L20", synthesized(CellContent::formula("=COUNT(L6:L18)")));
    Workbook::new(vec![docs, sheet]).expect("fixture layout is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::CellAddress;
    use crate::fixtures::{FixtureKind, PROVENANCE};

    fn text(wb: &Workbook, a1: &str) -> String {
        wb.cell(&CellAddress::at(DOSE_SHEET, a1)).unwrap().literal.as_text().unwrap().to_string()
    }

    #[test]
    fn printed_table_is_reproduced() {
        let wb = gen_pediatric(&FixtureSpec::new(FixtureKind::Pediatric));
        let l7 = wb.cell(&CellAddress::at(DOSE_SHEET, "L7")).unwrap();
        assert_eq!(l7.formula_text().unwrap(), ATROPINE_FORMULA);
        assert_eq!(l7.meta[PROVENANCE], "published");
        assert_eq!(text(&wb, "K9"), "4 mcg/kg");
        assert_eq!(text(&wb, "L5"), "mg");
        assert_eq!(text(&wb, "I5"), "Pre-operative");
        assert_eq!(text(&wb, "J18"), "IV (up to 50 mg)");
        assert!(wb.sheets[0].protected);
        let formats: String = DOSE_ROWS.iter().map(|r| r.decimals.to_string()).collect();
        assert_eq!(formats, "2213211212111");
    }

    #[test]
    fn bsa_is_optional() {
        let with = gen_pediatric(&FixtureSpec::new(FixtureKind::Pediatric));
        let without = gen_pediatric(&FixtureSpec { include_bsa: false, ..FixtureSpec::new(FixtureKind::Pediatric) });
        assert!(with.cell(&CellAddress::at(DOSE_SHEET, BSA_CELL)).unwrap().has_formula());
        assert!(without.cell(&CellAddress::at(DOSE_SHEET, BSA_CELL)).is_none());
    }

    #[test]
    fn clean_variant_uses_consistent_units() {
        let wb = gen_clean_pediatric(&FixtureSpec::new(FixtureKind::CleanPediatric));
        assert_eq!(text(&wb, "K9"), "0.004 mg/kg");
        assert_eq!(
            wb.cell(&CellAddress::at(DOSE_SHEET, "L7")).unwrap().formula_text().unwrap(),
            "=IF(ISBLANK(E19),\"\",MAX(N7,MIN(O7,E19*M7)))"
        );
    }
}
