//! The rule catalog: what each rule detects, its severity policy, and the
//! remediation attached to its findings. `docs/rule-catalog.md` renders the
//! same table for readers.

use super::RuleId;

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub id: RuleId,
    pub title: &'static str,
    pub hazard: &'static str,
    pub severity: &'static str,
    pub remediation: &'static str,
}

impl CatalogEntry {
    /// Fragment link into the rule catalog document.
    pub fn anchor(&self) -> String {
        format!("docs/rule-catalog.md#{}", self.id.as_str().to_ascii_lowercase())
    }
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: RuleId::R0,
        title: "Unreadable formula",
        hazard: "A formula the auditor cannot parse, whose references cannot be resolved, or that sits on a reference cycle cannot be analysed by the other rules.",
        severity: "high for parse failures; warn for unresolved sheets, names, truncated ranges and cycles",
        remediation: "Rewrite the formula using supported syntax, fix the reference so it names an existing sheet or defined name, or break the cycle.",
    },
    CatalogEntry {
        id: RuleId::R1,
        title: "Embedded constants",
        hazard: "Numeric constants hidden inside formulas cannot be reviewed or updated in one place.",
        severity: "warn",
        remediation: "Move constants to a clearly labelled data area and reference them from the formula.",
    },
    CatalogEntry {
        id: RuleId::R2,
        title: "Nested conditional logic",
        hazard: "Deeply nested IFs and stacked AND/OR conditions are error-prone and hard to maintain.",
        severity: "warn when depth or connective count reaches its threshold; high when both do",
        remediation: "Replace nested IFs with a lookup (VLOOKUP over a dose table) or MIN/MAX bounds.",
    },
    CatalogEntry {
        id: RuleId::R3,
        title: "Protection is advisory",
        hazard: "Sheet protection is easily bypassed (for example by copying the sheet) and can give a false sense of security.",
        severity: "info per protected sheet; high per unlocked formula on a protected sheet; warn when nothing is protected",
        remediation: "Protect sheets with input cells unlocked and every formula locked, and do not rely on protection alone.",
    },
    CatalogEntry {
        id: RuleId::R4,
        title: "Missing documentation",
        hazard: "Without embedded documentation users cannot tell what the workbook computes or how to use it.",
        severity: "warn",
        remediation: "Add a documentation sheet (named e.g. Instructions or ReadMe) describing purpose, inputs, outputs and sources.",
    },
    CatalogEntry {
        id: RuleId::R5,
        title: "Missing input validation",
        hazard: "Inputs without validation accept blanks, text and implausible values.",
        severity: "warn without validation; info when only blanks are rejected",
        remediation: "Attach range validation with plausible limits to every input cell.",
    },
    CatalogEntry {
        id: RuleId::R6,
        title: "Formula with no dependents",
        hazard: "A formula nothing depends on is either a deliberate output or an orphan that may mislead.",
        severity: "info for completeness checks (ISBLANK, COUNT, COUNTA); warn otherwise",
        remediation: "Remove unused formulas, or label and document them as outputs.",
    },
    CatalogEntry {
        id: RuleId::R7a,
        title: "Unit mismatch between label and column header",
        hazard: "A dose labelled in micrograms under a milligram header invites a thousand-fold dosing error.",
        severity: "high",
        remediation: "Express the dose in the column's unit, or give exceptional rows a distinct background colour and explicit unit.",
    },
    CatalogEntry {
        id: RuleId::R7b,
        title: "Label rate and formula disagree",
        hazard: "A rate printed in a label and repeated as a formula constant can drift apart silently.",
        severity: "high when the formula does not use the labelled rate; info when it repeats it as a constant",
        remediation: "Keep the rate in one referenced cell and derive both the label and the formula from it.",
    },
    CatalogEntry {
        id: RuleId::R8,
        title: "Nonzero value displayed as zero",
        hazard: "Fixed-decimal formats can round a real dose to a displayed zero.",
        severity: "high",
        remediation: "Use enough decimal places, or display the dose in a smaller unit.",
    },
    CatalogEntry {
        id: RuleId::R9,
        title: "Dose shown without patient data",
        hazard: "A formula that yields a nonzero result with its inputs blank displays a plausible dose before any data is entered.",
        severity: "high",
        remediation: "Return a blank or a prompt until the required inputs are present.",
    },
    CatalogEntry {
        id: RuleId::D0,
        title: "Structural change",
        hazard: "Sheets added, removed or renamed between versions break cell-by-cell comparison.",
        severity: "warn",
        remediation: "Confirm the structural change was intended before comparing cell contents.",
    },
    CatalogEntry {
        id: RuleId::D1,
        title: "Formula overwritten",
        hazard: "A formula replaced by a constant or blank stops responding to its inputs.",
        severity: "high",
        remediation: "Restore the formula and protect the cell.",
    },
    CatalogEntry {
        id: RuleId::D2,
        title: "Formula changed",
        hazard: "Changed constants inside a formula alter results without any visible sign.",
        severity: "high when numeric constants changed; info otherwise",
        remediation: "Review the change against the source of the constants and record it.",
    },
    CatalogEntry {
        id: RuleId::D3,
        title: "Validation removed or weakened",
        hazard: "Dropping or widening a validation rule lets bad inputs through.",
        severity: "warn",
        remediation: "Restore the validation rule or document why it was relaxed.",
    },
];

pub fn entry(id: RuleId) -> &'static CatalogEntry {
    CATALOG.iter().find(|e| e.id == id).expect("every rule has a catalog entry")
}
