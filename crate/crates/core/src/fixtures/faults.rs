use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::address::CellAddress;
use crate::eval::{Value, WorkbookEvaluator};
use crate::formula::{parse_formula, Expr};
use crate::number::{int, to_exact_string};
use crate::rules::{header_cell, label_cells, unit_spans, unit_tokens, AuditContext, RuleConfig, RuleId};
use crate::workbook::{CellContent, Literal, Workbook};

/// Modification mistakes a maintainer can make by hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultKind {
    /// A formula is typed over with the value it currently shows.
    OverwriteFormulaWithConstant,
    /// One constant inside a formula loses a factor of ten.
    TypoConstant,
    /// An input cell's validation rule is deleted.
    DeleteValidation,
    /// `mg` in a dose label becomes `mcg`.
    SwapUnitLabel,
    /// A formula cell on a protected sheet is unlocked.
    UnlockCell,
    /// A formula is deleted, leaving the cell blank.
    BlankFormula,
}

impl FaultKind {
    pub const ALL: [FaultKind; 6] = [
        FaultKind::OverwriteFormulaWithConstant,
        FaultKind::TypoConstant,
        FaultKind::DeleteValidation,
        FaultKind::SwapUnitLabel,
        FaultKind::UnlockCell,
        FaultKind::BlankFormula,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::OverwriteFormulaWithConstant => "overwrite-formula-with-constant",
            FaultKind::TypoConstant => "typo-constant",
            FaultKind::DeleteValidation => "delete-validation",
            FaultKind::SwapUnitLabel => "swap-unit-label",
            FaultKind::UnlockCell => "unlock-cell",
            FaultKind::BlankFormula => "blank-formula",
        }
    }

    /// Rules expected to report this fault (through the audit or the diff).
    pub fn expected_rules(self) -> BTreeSet<RuleId> {
        let ids: &[RuleId] = match self {
            FaultKind::OverwriteFormulaWithConstant => &[RuleId::D1],
            FaultKind::TypoConstant => &[RuleId::D2, RuleId::R7b],
            FaultKind::DeleteValidation => &[RuleId::D3, RuleId::R5],
            FaultKind::SwapUnitLabel => &[RuleId::R7a],
            FaultKind::UnlockCell => &[RuleId::R3],
            FaultKind::BlankFormula => &[RuleId::D1, RuleId::R6],
        };
        ids.iter().copied().collect()
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown fault kind {s:?}"))
    }
}

/// Audit trail of one injected fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    pub kind: FaultKind,
    pub seed: u64,
    pub target: CellAddress,
    pub before: CellContent,
    pub after: CellContent,
    /// Human-readable summary of the change.
    pub detail: String,
    pub expected_rules: BTreeSet<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultError {
    #[error("no cell in the workbook is eligible for {0}")]
    NoEligibleTarget(FaultKind),
}

fn formula_cells(wb: &Workbook) -> Vec<CellAddress> {
    wb.cells().filter(|(_, c)| c.has_formula()).map(|(a, _)| a).collect()
}

/// Formula cells with a nonzero constant, with the indices of those
/// constants in pre-order.
fn typo_candidates(wb: &Workbook) -> Vec<(CellAddress, Vec<usize>)> {
    wb.cells()
        .filter_map(|(addr, c)| {
            let ast = parse_formula(c.formula.as_deref()?).ok()?;
            let idx: Vec<usize> =
                ast.number_literals().iter().enumerate().filter(|(_, (v, _))| !v.is_zero()).map(|(i, _)| i).collect();
            (!idx.is_empty()).then_some((addr, idx))
        })
        .collect()
}

/// Label cells naming `mg` next to a formula whose column header is in mg.
fn unit_label_candidates(wb: &Workbook) -> Vec<CellAddress> {
    let lexicon = RuleConfig::default().unit_lexicon;
    let mut out = BTreeSet::new();
    for sheet in &wb.sheets {
        for (coord, cell) in &sheet.cells {
            if !cell.has_formula() {
                continue;
            }
            let Some(header) = header_cell(sheet, *coord, None) else { continue };
            let header_text = sheet.get(header).and_then(|c| c.literal.as_text()).unwrap_or("");
            if !unit_tokens(header_text, &lexicon).iter().any(|u| u == "mg") {
                continue;
            }
            for label in label_cells(sheet, *coord) {
                let text = sheet.get(label).and_then(|c| c.literal.as_text()).unwrap_or("");
                if unit_tokens(text, &lexicon) == ["mg"] {
                    out.insert((wb.sheets.iter().position(|s| s.name == sheet.name), label));
                }
            }
        }
    }
    out.into_iter()
        .map(|(i, coord)| CellAddress::new(wb.sheets[i.expect("sheet exists")].name.clone(), coord))
        .collect()
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())].clone()
}

fn shown_with_blank_inputs(wb: &Workbook, target: &CellAddress) -> Literal {
    let cfg = RuleConfig::default();
    let ctx = AuditContext::new(wb, &cfg);
    let blanks: HashMap<CellAddress, Value> = ctx.entry_cells().iter().map(|c| (c.clone(), Value::Blank)).collect();
    match WorkbookEvaluator::with_overrides(wb, blanks).value(target) {
        Value::Number(n) => Literal::Number(n),
        Value::Text(t) => Literal::Text(t),
        Value::Bool(b) => Literal::Bool(b),
        Value::Blank | Value::Error(_) => Literal::Number(int(0)),
    }
}

/// Injects one fault of `kind`, choosing the target uniformly among
/// eligible cells with a generator seeded by `seed`. Label cells are only
/// ever targeted by [`FaultKind::SwapUnitLabel`].
pub fn inject_fault(wb: &Workbook, kind: FaultKind, seed: u64) -> Result<(Workbook, FaultRecord), FaultError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let none = || FaultError::NoEligibleTarget(kind);
    let (target, after, detail) = match kind {
        FaultKind::OverwriteFormulaWithConstant => {
            let target = pick(&mut rng, &non_empty(formula_cells(wb)).ok_or_else(none)?);
            let literal = shown_with_blank_inputs(wb, &target);
            let after = CellContent { formula: None, literal, ..wb.cell(&target).expect("target exists").clone() };
            let detail = format!("formula replaced by {:?}", after.literal);
            (target, after, detail)
        }
        FaultKind::TypoConstant => {
            let (target, indices) = pick(&mut rng, &non_empty(typo_candidates(wb)).ok_or_else(none)?);
            let index = pick(&mut rng, &indices);
            let before = wb.cell(&target).expect("target exists");
            let mut ast = parse_formula(before.formula.as_deref().expect("formula cell")).expect("parsed before");
            let Some(Expr::Number { value, text }) = ast.number_literal_mut(index) else { unreachable!() };
            let typo = &*value / int(10);
            let detail = format!("{text} -> {}", to_exact_string(&typo));
            *text = to_exact_string(&typo);
            *value = typo;
            let after = CellContent { formula: Some(ast.unparse()), ..before.clone() };
            (target, after, detail)
        }
        FaultKind::DeleteValidation => {
            let cells: Vec<CellAddress> = wb.cells().filter(|(_, c)| c.validation.is_some()).map(|(a, _)| a).collect();
            let target = pick(&mut rng, &non_empty(cells).ok_or_else(none)?);
            let after = CellContent { validation: None, ..wb.cell(&target).expect("target exists").clone() };
            (target, after, "validation removed".to_string())
        }
        FaultKind::SwapUnitLabel => {
            let target = pick(&mut rng, &non_empty(unit_label_candidates(wb)).ok_or_else(none)?);
            let before = wb.cell(&target).expect("target exists");
            let text = before.literal.as_text().expect("label is text");
            let lexicon = RuleConfig::default().unit_lexicon;
            let (span, _) = unit_spans(text, &lexicon).into_iter().find(|(_, u)| u == "mg").expect("label names mg");
            let swapped = format!("{}mcg{}", &text[..span.start], &text[span.end..]);
            let detail = format!("{text:?} -> {swapped:?}");
            let after = CellContent { literal: Literal::Text(swapped), ..before.clone() };
            (target, after, detail)
        }
        FaultKind::UnlockCell => {
            let cells: Vec<CellAddress> = wb
                .cells()
                .filter(|(a, c)| c.has_formula() && c.locked && wb.sheet(&a.sheet).is_some_and(|s| s.protected))
                .map(|(a, _)| a)
                .collect();
            let target = pick(&mut rng, &non_empty(cells).ok_or_else(none)?);
            let after = wb.cell(&target).expect("target exists").clone().unlocked();
            (target, after, "formula cell unlocked".to_string())
        }
        FaultKind::BlankFormula => {
            let target = pick(&mut rng, &non_empty(formula_cells(wb)).ok_or_else(none)?);
            let after = CellContent {
                formula: None,
                literal: Literal::Blank,
                ..wb.cell(&target).expect("target exists").clone()
            };
            (target, after, "formula deleted".to_string())
        }
    };
    let before = wb.cell(&target).expect("target exists").clone();
    debug_assert_ne!(before, after);
    let mut faulty = wb.clone();
    *faulty.cell_mut(&target).expect("target exists") = after.clone();
    let record = FaultRecord { kind, seed, target, before, after, detail, expected_rules: kind.expected_rules() };
    Ok((faulty, record))
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{gen_pediatric, FixtureKind, FixtureSpec, DOSE_SHEET};
    use crate::number::ratio;
    use crate::rules::diff_workbooks;
    use crate::workbook::Sheet;

    fn pediatric() -> Workbook {
        gen_pediatric(&FixtureSpec::new(FixtureKind::Pediatric))
    }

    fn changed_cells(a: &Workbook, b: &Workbook) -> Vec<CellAddress> {
        let mut out: Vec<CellAddress> =
            a.cells().filter(|(addr, c)| b.cell(addr) != Some(*c)).map(|(addr, _)| addr).collect();
        out.extend(b.cells().filter(|(addr, _)| a.cell(addr).is_none()).map(|(addr, _)| addr));
        out
    }

    #[test]
    fn exactly_one_cell_changes() {
        let wb = pediatric();
        for kind in FaultKind::ALL {
            for seed in 0..20 {
                let (faulty, rec) = inject_fault(&wb, kind, seed).unwrap();
                assert_eq!(changed_cells(&wb, &faulty), vec![rec.target.clone()], "{kind} {seed}");
                assert_ne!(rec.before, rec.after);
                assert_eq!(inject_fault(&wb, kind, seed).unwrap().1, rec);
            }
        }
    }

    #[test]
    fn overwrite_uses_the_blank_input_value() {
        let wb = pediatric();
        let hits: Vec<FaultRecord> =
            (0..200).map(|s| inject_fault(&wb, FaultKind::OverwriteFormulaWithConstant, s).unwrap().1).collect();
        let l7 = hits.iter().find(|r| r.target == CellAddress::at(DOSE_SHEET, "L7")).expect("L7 chosen by some seed");
        assert_eq!(l7.after.literal, Literal::Number(ratio(1, 10)));
        assert_eq!(l7.after.formula, None);
        let (faulty, rec) = inject_fault(&wb, FaultKind::OverwriteFormulaWithConstant, 1).unwrap();
        let d = diff_workbooks(&wb, &faulty);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].rule_id, d[0].primary()), (RuleId::D1, &rec.target));
    }

    #[test]
    fn unit_swaps_touch_mg_labels_only() {
        let wb = pediatric();
        for seed in 0..50 {
            let (_, rec) = inject_fault(&wb, FaultKind::SwapUnitLabel, seed).unwrap();
            let (before, after) = (rec.before.literal.as_text().unwrap(), rec.after.literal.as_text().unwrap());
            assert_eq!(before.replacen("mg", "mcg", 1), after, "{rec:?}");
        }
    }

    #[test]
    fn typos_shift_one_constant() {
        let wb = pediatric();
        for seed in 0..50 {
            let (_, rec) = inject_fault(&wb, FaultKind::TypoConstant, seed).unwrap();
            let lits = |c: &CellContent| {
                parse_formula(c.formula.as_deref().unwrap())
                    .unwrap()
                    .number_literals()
                    .into_iter()
                    .map(|(v, _)| v.clone())
                    .collect::<Vec<_>>()
            };
            let (a, b) = (lits(&rec.before), lits(&rec.after));
            let diffs: Vec<usize> = (0..a.len()).filter(|i| a[*i] != b[*i]).collect();
            assert_eq!(diffs.len(), 1, "{rec:?}");
            assert_eq!(&a[diffs[0]] / int(10), b[diffs[0]]);
        }
    }

    #[test]
    fn missing_targets_are_errors() {
        let wb = Workbook::new(vec![Sheet::new("Empty")]).unwrap();
        for kind in FaultKind::ALL {
            assert_eq!(inject_fault(&wb, kind, 0).unwrap_err(), FaultError::NoEligibleTarget(kind));
        }
    }

    #[test]
    fn kinds_parse() {
        for k in FaultKind::ALL {
            assert_eq!(k.as_str().parse::<FaultKind>().unwrap(), k);
        }
    }
}
