use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;

use super::units::{cell_text, extract_rate, header_cell, label_cells, unit_tokens};
use super::{sort_findings, Finding, RuleConfig, RuleId, Severity};
use crate::address::{CellAddress, Coord};
use crate::eval::{as_clamp, render, Value, WorkbookEvaluator};
use crate::formula::{metrics, Expr};
use crate::graph::{DependencyGraph, Role};
use crate::number::{format_general, parse_exact, to_exact_string, Rational};
use crate::workbook::{NumberFormat, ValidationKind, Workbook};

/// Everything the detectors share for one audit: the workbook, the
/// configuration and the dependency graph built once up front.
pub struct AuditContext<'a> {
    pub wb: &'a Workbook,
    pub cfg: &'a RuleConfig,
    pub graph: DependencyGraph,
    whitelist: Vec<Rational>,
    samples: Vec<Rational>,
    entries: Vec<CellAddress>,
}

impl<'a> AuditContext<'a> {
    /// Invalid configuration entries are ignored here; callers that accept
    /// user configuration run [`RuleConfig::check`] first.
    pub fn new(wb: &'a Workbook, cfg: &'a RuleConfig) -> Self {
        let graph = DependencyGraph::build(wb);
        let whitelist = cfg.literal_whitelist.iter().filter_map(|t| parse_exact(t)).collect();
        let samples = cfg
            .sample_weights
            .values()
            .unwrap_or_else(|_| super::SampleWeights::default().values().expect("default weights are valid"));
        let inputs: Vec<CellAddress> = graph
            .nodes()
            .into_iter()
            .filter(|c| graph.role(c) == Some(Role::Input) && wb.contains(c))
            .cloned()
            .collect();
        let unlocked: Vec<CellAddress> =
            inputs.iter().filter(|c| wb.cell(c).is_some_and(|x| !x.locked)).cloned().collect();
        let mut entries = if unlocked.is_empty() { inputs } else { unlocked };
        entries.sort_by_key(|c| graph.order_key(c));
        AuditContext { wb, cfg, graph, whitelist, samples, entries }
    }

    /// Data-entry cells: input cells left unlocked for the user, or every
    /// input cell when none are unlocked.
    pub fn entry_cells(&self) -> &[CellAddress] {
        &self.entries
    }

    fn formulas(&self) -> Vec<(&CellAddress, &Expr)> {
        let mut out: Vec<_> = self.graph.asts().collect();
        out.sort_by_key(|(c, _)| self.graph.order_key(c));
        out
    }

    /// The cell cited by findings about a whole sheet: its first populated
    /// cell, or A1 when it is empty.
    fn sheet_anchor(&self, index: usize) -> CellAddress {
        let sheet = &self.wb.sheets[index];
        let coord = sheet
            .cells
            .iter()
            .find(|(_, c)| c.has_formula() || !c.literal.is_blank())
            .or_else(|| sheet.cells.iter().next())
            .map(|(coord, _)| *coord)
            .unwrap_or(Coord { col: 1, row: 1 });
        CellAddress::new(sheet.name.clone(), coord)
    }

    fn first_formula(&self) -> Option<CellAddress> {
        self.wb.cells().find(|(_, c)| c.has_formula()).map(|(a, _)| a)
    }
}

fn is_completeness_check(ast: &Expr) -> bool {
    matches!(ast.unwrap_parens(), Expr::Call { name, .. } if matches!(name.as_str(), "ISBLANK" | "COUNT" | "COUNTA"))
}

fn is_zero_text(s: &str) -> bool {
    s.chars().any(|c| c == '0') && s.chars().all(|c| matches!(c, '0' | '.' | '-'))
}

fn join<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> String {
    items.into_iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().join(", ")
}

/// Runs every enabled audit rule and returns the findings in report order.
type Detector = fn(&AuditContext) -> Vec<Finding>;

pub fn run_all(wb: &Workbook, cfg: &RuleConfig) -> Vec<Finding> {
    let ctx = AuditContext::new(wb, cfg);
    let detectors: [(&[RuleId], Detector); 10] = [
        (&[RuleId::R0], r0_unparseable),
        (&[RuleId::R1], r1_embedded_constants),
        (&[RuleId::R2], r2_nested_if),
        (&[RuleId::R3], r3_protection),
        (&[RuleId::R4], r4_documentation),
        (&[RuleId::R5], r5_missing_validation),
        (&[RuleId::R6], r6_dead_formula),
        (&[RuleId::R7a, RuleId::R7b], r7_units),
        (&[RuleId::R8], r8_zero_display),
        (&[RuleId::R9], r9_blank_input_dose),
    ];
    let mut out: Vec<Finding> = detectors
        .iter()
        .filter(|(ids, _)| ids.iter().any(|id| cfg.enabled(*id)))
        .flat_map(|(_, detect)| detect(&ctx))
        .filter(|f| cfg.enabled(f.rule_id))
        .collect();
    sort_findings(wb, &mut out);
    out
}

pub fn r0_unparseable(ctx: &AuditContext) -> Vec<Finding> {
    let mut out: Vec<Finding> = ctx
        .graph
        .parse_failures
        .iter()
        .map(|p| {
            Finding::new(
                RuleId::R0,
                Severity::High,
                vec![p.cell.clone()],
                format!("formula could not be parsed: {}", p.error),
            )
            .with("formula", &p.formula)
        })
        .collect();
    out.extend(
        ctx.graph
            .warnings
            .iter()
            .map(|w| Finding::new(RuleId::R0, Severity::Warn, vec![w.cell().clone()], w.message())),
    );
    for cycle in ctx.graph.detect_cycles() {
        let path = join(cycle.iter().map(|c| c.qualified()));
        out.push(
            Finding::new(RuleId::R0, Severity::Warn, cycle, "circular reference; the cells cannot be evaluated")
                .with("cycle", path)
                .with_remediation("Break the circular reference so every value has a defined order of calculation."),
        );
    }
    out
}

pub fn r1_embedded_constants(ctx: &AuditContext) -> Vec<Finding> {
    let mut out = Vec::new();
    for (cell, ast) in ctx.formulas() {
        let m = metrics(ast, &ctx.whitelist);
        if m.literal_count == 0 {
            continue;
        }
        let mut texts: Vec<&str> = Vec::new();
        for (value, text) in ast.number_literals() {
            if !ctx.whitelist.contains(value) && !texts.contains(&text) {
                texts.push(text);
            }
        }
        out.push(
            Finding::new(
                RuleId::R1,
                Severity::Warn,
                vec![cell.clone()],
                format!("{} embedded constant(s) in formula: {}", m.literal_count, join(&texts)),
            )
            .with("literals", join(&texts))
            .with("count", m.literal_count),
        );
    }
    out
}

pub fn r2_nested_if(ctx: &AuditContext) -> Vec<Finding> {
    let (td, tc) = (ctx.cfg.if_depth_threshold, ctx.cfg.connective_threshold);
    let mut out = Vec::new();
    for (cell, ast) in ctx.formulas() {
        let m = metrics(ast, &ctx.whitelist);
        let (deep, connected) = (m.if_depth >= td, m.connective_count >= tc);
        if !(deep || connected) {
            continue;
        }
        let severity = if deep && connected { Severity::High } else { Severity::Warn };
        let mut f = Finding::new(
            RuleId::R2,
            severity,
            vec![cell.clone()],
            format!("IF nesting depth {} with {} AND/OR condition(s)", m.if_depth, m.connective_count),
        )
        .with("if_depth", m.if_depth)
        .with("connectives", m.connective_count);
        if let Some(form) = as_clamp(ast) {
            let (min, max, scale) =
                (to_exact_string(&form.min), to_exact_string(&form.max), to_exact_string(&form.scale));
            let rewrite = format!("=MAX({min},MIN({max},{}*{scale}))", form.input);
            f = f
                .with("clamp_input", &form.input)
                .with("clamp_scale", &scale)
                .with("clamp_min", &min)
                .with("clamp_max", &max)
                .with("suggested_rewrite", &rewrite)
                .with_remediation(format!(
                    "This is a bounded dose: write it as {rewrite}, with the rate and limits held in labelled cells."
                ));
        }
        out.push(f);
    }
    out
}

pub fn r3_protection(ctx: &AuditContext) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, sheet) in ctx.wb.sheets.iter().enumerate() {
        if !sheet.protected {
            continue;
        }
        out.push(
            Finding::new(
                RuleId::R3,
                Severity::Info,
                vec![ctx.sheet_anchor(i)],
                format!("sheet '{}' is protected; protection is advisory and the contents can be copied to an unprotected sheet", sheet.name),
            )
            .with("sheet", &sheet.name),
        );
        for (coord, cell) in &sheet.cells {
            if cell.has_formula() && !cell.locked {
                out.push(Finding::new(
                    RuleId::R3,
                    Severity::High,
                    vec![CellAddress::new(sheet.name.clone(), *coord)],
                    "formula cell is unlocked on a protected sheet and can be overwritten",
                ));
            }
        }
    }
    let any_protected = ctx.wb.sheets.iter().any(|s| s.protected);
    if !any_protected && ctx.first_formula().is_some() {
        out.push(Finding::new(
            RuleId::R3,
            Severity::Warn,
            vec![ctx.sheet_anchor(0)],
            "no sheet is protected; formulas can be overwritten by accident",
        ));
    }
    out
}

pub const DOC_SHEET_WORDS: [&str; 4] = ["doc", "readme", "instructions", "notes"];

pub fn r4_documentation(ctx: &AuditContext) -> Vec<Finding> {
    let documented = ctx.wb.sheets.iter().any(|s| {
        let name = s.name.to_lowercase();
        DOC_SHEET_WORDS.iter().any(|w| name.contains(w))
    });
    if documented {
        return Vec::new();
    }
    vec![Finding::new(RuleId::R4, Severity::Warn, vec![ctx.sheet_anchor(0)], "workbook has no documentation sheet")
        .with("sheets", join(ctx.wb.sheets.iter().map(|s| s.name.as_str())))]
}

pub fn r5_missing_validation(ctx: &AuditContext) -> Vec<Finding> {
    let mut out = Vec::new();
    for cell in ctx.entry_cells() {
        let validation = ctx.wb.cell(cell).and_then(|c| c.validation.as_ref());
        match validation.map(|v| v.kind) {
            None => out.push(Finding::new(
                RuleId::R5,
                Severity::Warn,
                vec![cell.clone()],
                "input cell has no data validation",
            )),
            Some(ValidationKind::NonBlankOnly) => out.push(
                Finding::new(
                    RuleId::R5,
                    Severity::Info,
                    vec![cell.clone()],
                    "input cell only rejects blanks; that gives no assurance the value is correct",
                )
                .with("validation", ValidationKind::NonBlankOnly.as_str()),
            ),
            Some(_) => {}
        }
    }
    out
}

pub fn r6_dead_formula(ctx: &AuditContext) -> Vec<Finding> {
    ctx.graph
        .dead_formulas()
        .into_iter()
        .filter(|c| !ctx.cfg.is_suppressed(ctx.wb, c))
        .map(|c| {
            let completeness = ctx.graph.ast(&c).is_some_and(is_completeness_check);
            if completeness {
                Finding::new(RuleId::R6, Severity::Info, vec![c], "completeness check with no dependents")
            } else {
                Finding::new(RuleId::R6, Severity::Warn, vec![c], "formula has no dependents")
            }
        })
        .collect()
}

/// Both unit rules: R7a (label unit differs from the column header unit)
/// and R7b (label rate not used by the formula).
pub fn r7_units(ctx: &AuditContext) -> Vec<Finding> {
    let lexicon = &ctx.cfg.unit_lexicon;
    let mut out = Vec::new();
    for (cell, ast) in ctx.formulas() {
        let Some(sheet) = ctx.wb.sheet(&cell.sheet) else { continue };
        let labels = label_cells(sheet, cell.coord());
        let at = |coord: Coord| CellAddress::new(sheet.name.clone(), coord);

        if let Some(header) = header_cell(sheet, cell.coord(), ctx.cfg.header_row) {
            let header_units = unit_tokens(cell_text(sheet, header), lexicon);
            let offending = labels
                .iter()
                .map(|c| (*c, unit_tokens(cell_text(sheet, *c), lexicon)))
                .find(|(_, u)| u.iter().any(|x| !header_units.contains(x)));
            if let Some((label, label_units)) = offending {
                if !header_units.is_empty() {
                    out.push(
                        Finding::new(
                            RuleId::R7a,
                            Severity::High,
                            vec![cell.clone(), at(label), at(header)],
                            format!(
                                "label {} is in {} but the column header is {}",
                                label.to_a1(),
                                join(&label_units),
                                join(&header_units)
                            ),
                        )
                        .with("label", cell_text(sheet, label))
                        .with("label_units", join(&label_units))
                        .with("header", cell_text(sheet, header))
                        .with("header_units", join(&header_units)),
                    );
                }
            }
        }

        let rate = labels.iter().find_map(|c| extract_rate(cell_text(sheet, *c), lexicon).map(|r| (*c, r)));
        let Some((label, rate)) = rate else { continue };
        let candidates = rate.candidates();
        let literals = ast.number_literals();
        let literal_texts = join(literals.iter().map(|(_, t)| *t));
        let cited = vec![cell.clone(), at(label)];
        if literals.iter().any(|(v, _)| candidates.contains(v)) {
            out.push(
                Finding::new(
                    RuleId::R7b,
                    Severity::Info,
                    cited,
                    format!("rate {} from label {} is repeated as a constant in the formula", rate.text, label.to_a1()),
                )
                .with("label_rate", &rate.text)
                .with("formula_literals", literal_texts),
            );
            continue;
        }
        let from_precedent = ctx
            .graph
            .precedents(cell)
            .any(|p| ctx.wb.cell(p).and_then(|c| c.literal.as_number()).is_some_and(|n| candidates.contains(n)));
        if !from_precedent {
            out.push(
                Finding::new(
                    RuleId::R7b,
                    Severity::High,
                    cited,
                    format!("formula does not use the rate {} stated in label {}", rate.text, label.to_a1()),
                )
                .with("label_rate", &rate.text)
                .with("formula_literals", literal_texts),
            );
        }
    }
    out
}

fn no_inputs_note(ctx: &AuditContext, rule: RuleId) -> Vec<Finding> {
    match ctx.first_formula() {
        Some(cell) => vec![Finding::new(
            rule,
            Severity::Info,
            vec![cell],
            "no input cells were recognized, so dose behaviour was not simulated",
        )],
        None => Vec::new(),
    }
}

fn depends_on_entry(ctx: &AuditContext, cell: &CellAddress) -> bool {
    let entries: BTreeSet<&CellAddress> = ctx.entry_cells().iter().collect();
    ctx.graph.transitive_precedents(cell).iter().any(|p| entries.contains(p))
}

pub fn r8_zero_display(ctx: &AuditContext) -> Vec<Finding> {
    if ctx.entry_cells().is_empty() {
        return no_inputs_note(ctx, RuleId::R8);
    }
    let mut pending: Vec<(&CellAddress, NumberFormat, u32)> = ctx
        .formulas()
        .into_iter()
        .filter_map(|(cell, _)| {
            let format = ctx.wb.cell(cell)?.format.clone();
            let places = format.decimals()?;
            depends_on_entry(ctx, cell).then_some((cell, format, places))
        })
        .collect();
    let mut out = Vec::new();
    for w in &ctx.samples {
        if pending.is_empty() {
            break;
        }
        let overrides: HashMap<CellAddress, Value> =
            ctx.entry_cells().iter().map(|c| (c.clone(), Value::Number(w.clone()))).collect();
        let mut ev = WorkbookEvaluator::with_overrides(ctx.wb, overrides);
        pending.retain(|(cell, format, places)| {
            let value = ev.value(cell);
            let Value::Number(n) = &value else { return true };
            let shown = render(&value, format);
            if n.is_zero() || !is_zero_text(&shown) {
                return true;
            }
            out.push(
                Finding::new(
                    RuleId::R8,
                    Severity::High,
                    vec![(*cell).clone()],
                    format!(
                        "nonzero result {} is displayed as {shown} (format {}) when inputs are {}",
                        format_general(n),
                        format.pattern(),
                        format_general(w)
                    ),
                )
                .with("input_value", format_general(w))
                .with("value", to_exact_string(n))
                .with("displayed", &shown)
                .with("decimals", places),
            );
            false
        });
    }
    out
}

pub fn r9_blank_input_dose(ctx: &AuditContext) -> Vec<Finding> {
    if ctx.entry_cells().is_empty() {
        return no_inputs_note(ctx, RuleId::R9);
    }
    let overrides: HashMap<CellAddress, Value> = ctx.entry_cells().iter().map(|c| (c.clone(), Value::Blank)).collect();
    let mut ev = WorkbookEvaluator::with_overrides(ctx.wb, overrides);
    let mut out = Vec::new();
    for (cell, ast) in ctx.formulas() {
        if is_completeness_check(ast) || !depends_on_entry(ctx, cell) {
            continue;
        }
        let value = ev.value(cell);
        let Value::Number(n) = &value else { continue };
        if n.is_zero() {
            continue;
        }
        let format = ctx.wb.cell(cell).map(|c| c.format.clone()).unwrap_or_else(NumberFormat::general);
        let blanked: Vec<String> = ctx
            .entry_cells()
            .iter()
            .filter(|e| ctx.graph.transitive_precedents(cell).contains(*e))
            .map(|e| e.qualified())
            .collect();
        out.push(
            Finding::new(
                RuleId::R9,
                Severity::High,
                vec![cell.clone()],
                format!("shows {} while its input cells are blank", render(&value, &format)),
            )
            .with("value", to_exact_string(n))
            .with("displayed", render(&value, &format))
            .with("blank_inputs", join(&blanked)),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{int, ratio};
    use crate::workbook::{CellContent, Sheet, ValidationRule};

    const ATROPINE: &str = "=IF(E19*0.02>0.6,0.6,IF(E19*0.02<0.1,0.1,E19*0.02))";

    fn one_sheet(cells: &[(&str, CellContent)]) -> Workbook {
        let mut s = Sheet::new("Calc");
        for (a1, c) in cells {
            s.set(a1, c.clone());
        }
        Workbook::new(vec![s]).unwrap()
    }

    fn only(wb: &Workbook, rule: RuleId) -> Vec<Finding> {
        let cfg = RuleConfig { rules: [rule].into_iter().collect(), ..RuleConfig::default() };
        run_all(wb, &cfg)
    }

    fn l7(f: &[Finding]) -> Vec<(Severity, String)> {
        f.iter().map(|f| (f.severity, f.primary().a1())).collect()
    }

    #[test]
    fn empty_workbook_reports_only_missing_documentation() {
        let wb = Workbook::new(vec![Sheet::new("Sheet1")]).unwrap();
        let f = run_all(&wb, &RuleConfig::default());
        assert_eq!(f.iter().map(|f| f.rule_id).collect::<Vec<_>>(), vec![RuleId::R4]);
        let literals = one_sheet(&[("A1", CellContent::number(int(3))), ("B1", CellContent::text("x"))]);
        let f = run_all(&literals, &RuleConfig::default());
        assert!(f.iter().all(|f| !matches!(f.rule_id, RuleId::R1 | RuleId::R2 | RuleId::R6)), "{f:?}");
    }

    #[test]
    fn embedded_constants() {
        let wb = one_sheet(&[("L7", CellContent::formula(ATROPINE))]);
        let f = only(&wb, RuleId::R1);
        assert_eq!(l7(&f), vec![(Severity::Warn, "L7".to_string())]);
        assert_eq!(f[0].evidence["literals"], "0.02, 0.6, 0.1");
        assert_eq!(f[0].evidence["count"], "7");
        assert!(only(&one_sheet(&[("C1", CellContent::formula("=A1+B1"))]), RuleId::R1).is_empty());
        let times_one = one_sheet(&[("C1", CellContent::formula("=A1*1"))]);
        assert!(only(&times_one, RuleId::R1).is_empty());
        let cfg = RuleConfig {
            rules: [RuleId::R1].into_iter().collect(),
            literal_whitelist: vec![],
            ..RuleConfig::default()
        };
        assert_eq!(run_all(&times_one, &cfg).len(), 1);
    }

    #[test]
    fn nested_conditionals() {
        let wb = one_sheet(&[
            ("L7", CellContent::formula(ATROPINE)),
            ("A1", CellContent::formula("=IF(A2>0,1,0)")),
            ("B1", CellContent::formula("=IF(AND(A1>0,OR(B2>1,C1>2)),IF(D1>3,1,2),0)")),
        ]);
        let f = only(&wb, RuleId::R2);
        assert_eq!(l7(&f), vec![(Severity::High, "B1".into()), (Severity::Warn, "L7".into())]);
        let atropine = &f[1];
        assert_eq!(atropine.evidence["clamp_min"], "0.1");
        assert_eq!(atropine.evidence["clamp_max"], "0.6");
        assert_eq!(atropine.evidence["clamp_scale"], "0.02");
        assert_eq!(atropine.evidence["suggested_rewrite"], "=MAX(0.1,MIN(0.6,E19*0.02))");
    }

    #[test]
    fn protection() {
        let formula = CellContent::formula("=A1*2");
        let mut locked = one_sheet(&[("B1", formula.clone())]);
        locked.sheets[0].protected = true;
        assert_eq!(l7(&only(&locked, RuleId::R3)), vec![(Severity::Info, "B1".into())]);
        let mut unlocked = one_sheet(&[("B1", formula.clone().unlocked())]);
        unlocked.sheets[0].protected = true;
        assert_eq!(
            l7(&only(&unlocked, RuleId::R3)),
            vec![(Severity::High, "B1".into()), (Severity::Info, "B1".into())]
        );
        let open = one_sheet(&[("B1", formula)]);
        assert_eq!(l7(&only(&open, RuleId::R3)), vec![(Severity::Warn, "B1".into())]);
    }

    #[test]
    fn documentation_sheet_names() {
        for (name, expected) in [("Instructions", 0), ("readme_v2", 0), ("Dosing NOTES", 0), ("Calc2", 1)] {
            let wb = Workbook::new(vec![Sheet::new("Calc"), Sheet::new(name)]).unwrap();
            assert_eq!(only(&wb, RuleId::R4).len(), expected, "{name}");
        }
    }

    #[test]
    fn input_validation() {
        let weight = |c: CellContent| one_sheet(&[("L7", CellContent::formula(ATROPINE)), ("E19", c)]);
        let none = only(&weight(CellContent::blank()), RuleId::R5);
        assert_eq!(l7(&none), vec![(Severity::Warn, "E19".into())]);
        let range = weight(CellContent::blank().with_validation(ValidationRule::decimal_range(ratio(1, 2), int(200))));
        assert!(only(&range, RuleId::R5).is_empty());
        let nonblank = weight(CellContent::blank().with_validation(ValidationRule::non_blank()));
        assert_eq!(l7(&only(&nonblank, RuleId::R5)), vec![(Severity::Info, "E19".into())]);
    }

    #[test]
    fn unlocked_cells_are_the_entry_cells() {
        let wb = one_sheet(&[
            ("L7", CellContent::formula("=E19*M7")),
            ("E19", CellContent::blank().unlocked()),
            ("M7", CellContent::number(ratio(1, 50))),
        ]);
        assert_eq!(l7(&only(&wb, RuleId::R5)), vec![(Severity::Warn, "E19".into())]);
    }

    #[test]
    fn dead_formulas() {
        let wb = one_sheet(&[
            ("A1", CellContent::formula("=(4*E19+7)/(E19+90)")),
            ("A2", CellContent::formula("=COUNTA(B2:B8)")),
            ("A3", CellContent::formula("=E19*2")),
            ("A4", CellContent::formula("=A3+1")),
        ]);
        let f = only(&wb, RuleId::R6);
        assert_eq!(
            l7(&f),
            vec![(Severity::Warn, "A1".into()), (Severity::Warn, "A4".into()), (Severity::Info, "A2".into())]
        );
        let cfg = RuleConfig {
            rules: [RuleId::R6].into_iter().collect(),
            suppress: vec!["A1".into(), "Calc!A4".into()],
            ..RuleConfig::default()
        };
        assert_eq!(l7(&run_all(&wb, &cfg)), vec![(Severity::Info, "A2".into())]);
    }

    fn dose_row(label: &str, formula: &str) -> Workbook {
        one_sheet(&[
            ("L5", CellContent::text("mg")),
            ("I9", CellContent::text("Clonidine")),
            ("J9", CellContent::text("PO")),
            ("K9", CellContent::text(label)),
            ("L9", CellContent::formula(formula)),
        ])
    }

    #[test]
    fn unit_mismatch() {
        let f = only(&dose_row("4 mcg/kg", "=E19*0.004"), RuleId::R7a);
        assert_eq!(l7(&f), vec![(Severity::High, "L9".into())]);
        assert_eq!(f[0].cells.iter().map(|c| c.a1()).collect::<Vec<_>>(), vec!["L9", "K9", "L5"]);
        assert_eq!((f[0].evidence["label_units"].as_str(), f[0].evidence["header_units"].as_str()), ("mcg", "mg"));
        assert!(only(&dose_row("0.004 mg/kg", "=E19*0.004"), RuleId::R7a).is_empty());
    }

    #[test]
    fn label_rate_drift() {
        let dup = only(&dose_row("0.02 mg/kg", ATROPINE), RuleId::R7b);
        assert_eq!(l7(&dup), vec![(Severity::Info, "L9".into())]);
        let drift = only(&dose_row("0.02 mg/kg", &ATROPINE.replace("0.02", "0.002")), RuleId::R7b);
        assert_eq!(l7(&drift), vec![(Severity::High, "L9".into())]);
        let converted = only(&dose_row("4 mcg/kg", "=E19*0.004"), RuleId::R7b);
        assert_eq!(l7(&converted), vec![(Severity::Info, "L9".into())]);
        let mut referenced = dose_row("0.02 mg/kg", "=E19*M9");
        referenced.sheets[0].set("M9", CellContent::number(ratio(1, 50)));
        assert!(only(&referenced, RuleId::R7b).is_empty());
    }

    #[test]
    fn zero_display() {
        let book = |formula: &str, format: NumberFormat| {
            one_sheet(&[("E19", CellContent::blank()), ("L9", CellContent::formula(formula).with_format(format))])
        };
        let f = only(&book("=E19*0.0004", NumberFormat::fixed(3)), RuleId::R8);
        assert_eq!(l7(&f), vec![(Severity::High, "L9".into())]);
        assert_eq!((f[0].evidence["input_value"].as_str(), f[0].evidence["displayed"].as_str()), ("1", "0.000"));
        assert!(only(&book("=E19*0.1", NumberFormat::fixed(2)), RuleId::R8).is_empty());
        assert!(only(&book("=E19*0.0004", NumberFormat::general()), RuleId::R8).is_empty());
        // passes at 1 kg but rounds away at larger weights
        let late = only(&book("=1/(E19*E19)", NumberFormat::fixed(2)), RuleId::R8);
        assert_eq!(late[0].evidence["input_value"], "15");
    }

    #[test]
    fn blank_input_doses() {
        let book = |formula: &str| one_sheet(&[("E19", CellContent::blank()), ("L7", CellContent::formula(formula))]);
        let f = only(&book(ATROPINE), RuleId::R9);
        assert_eq!(l7(&f), vec![(Severity::High, "L7".into())]);
        assert_eq!(f[0].evidence["displayed"], "0.1");
        assert!(only(&book("=E19*0.5"), RuleId::R9).is_empty());
        assert_eq!(only(&book("=MAX(0.1, E19*0.02)"), RuleId::R9).len(), 1);
    }

    #[test]
    fn simulation_rules_note_missing_inputs() {
        let wb = one_sheet(&[("A1", CellContent::formula("=2*3"))]);
        for rule in [RuleId::R8, RuleId::R9] {
            let f = only(&wb, rule);
            assert_eq!(l7(&f), vec![(Severity::Info, "A1".into())]);
        }
    }

    #[test]
    fn parse_failures_and_unresolved_references() {
        let wb = one_sheet(&[
            ("A1", CellContent::formula("=1+")),
            ("A2", CellContent::formula("=Missing!B2")),
            ("A3", CellContent::formula("=A4")),
            ("A4", CellContent::formula("=A3")),
        ]);
        let f = only(&wb, RuleId::R0);
        assert_eq!(
            l7(&f),
            vec![(Severity::High, "A1".into()), (Severity::Warn, "A2".into()), (Severity::Warn, "A3".into())]
        );
    }

    #[test]
    fn disabling_a_rule_removes_only_its_findings() {
        let wb = one_sheet(&[
            ("E19", CellContent::blank()),
            ("L5", CellContent::text("mg")),
            ("K9", CellContent::text("4 mcg/kg")),
            ("L9", CellContent::formula(ATROPINE).with_format(NumberFormat::fixed(2))),
        ]);
        let all = run_all(&wb, &RuleConfig::default());
        for rule in RuleId::AUDIT {
            let cfg =
                RuleConfig { rules: RuleId::ALL.into_iter().filter(|r| *r != rule).collect(), ..RuleConfig::default() };
            let expected: Vec<Finding> = all.iter().filter(|f| f.rule_id != rule).cloned().collect();
            assert_eq!(run_all(&wb, &cfg), expected, "{rule}");
        }
    }
}
