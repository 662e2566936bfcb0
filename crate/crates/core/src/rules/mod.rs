//! Hazard detectors, workbook diffing and the findings they produce.

pub mod catalog;
mod config;
mod detectors;
mod diff;
mod units;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{RuleConfig, SampleWeights};
pub use detectors::{
    r0_unparseable, r1_embedded_constants, r2_nested_if, r3_protection, r4_documentation, r5_missing_validation,
    r6_dead_formula, r7_units, r8_zero_display, r9_blank_input_dose, run_all, AuditContext,
};
pub use diff::diff_workbooks;
pub use units::{extract_rate, header_cell, label_cells, unit_spans, unit_tokens, LabelRate};

use crate::address::CellAddress;
use crate::workbook::Workbook;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    High,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Info, Severity::Warn, Severity::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::High => "high",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown severity {s:?} (expected info, warn or high)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R0,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7a,
    R7b,
    R8,
    R9,
    D0,
    D1,
    D2,
    D3,
}

impl RuleId {
    pub const ALL: [RuleId; 15] = [
        RuleId::R0,
        RuleId::R1,
        RuleId::R2,
        RuleId::R3,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6,
        RuleId::R7a,
        RuleId::R7b,
        RuleId::R8,
        RuleId::R9,
        RuleId::D0,
        RuleId::D1,
        RuleId::D2,
        RuleId::D3,
    ];

    /// Rules run by an audit (the D rules belong to diffing).
    pub const AUDIT: [RuleId; 11] = [
        RuleId::R0,
        RuleId::R1,
        RuleId::R2,
        RuleId::R3,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6,
        RuleId::R7a,
        RuleId::R7b,
        RuleId::R8,
        RuleId::R9,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R0 => "R0",
            RuleId::R1 => "R1",
            RuleId::R2 => "R2",
            RuleId::R3 => "R3",
            RuleId::R4 => "R4",
            RuleId::R5 => "R5",
            RuleId::R6 => "R6",
            RuleId::R7a => "R7a",
            RuleId::R7b => "R7b",
            RuleId::R8 => "R8",
            RuleId::R9 => "R9",
            RuleId::D0 => "D0",
            RuleId::D1 => "D1",
            RuleId::D2 => "D2",
            RuleId::D3 => "D3",
        }
    }

    /// Parses a rule selector. `R7` selects both unit rules.
    pub fn parse_selector(s: &str) -> Result<Vec<RuleId>, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("R7") {
            return Ok(vec![RuleId::R7a, RuleId::R7b]);
        }
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .map(|r| vec![r])
            .ok_or_else(|| format!("unknown rule {s:?}"))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detected hazard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub severity: Severity,
    /// Cells the finding is about; never empty. The first is the primary
    /// location.
    pub cells: Vec<CellAddress>,
    pub message: String,
    pub evidence: BTreeMap<String, String>,
    pub remediation: String,
    /// Anchor of the rule's entry in the rule catalog.
    pub catalog: String,
}

impl Finding {
    pub fn new(rule_id: RuleId, severity: Severity, cells: Vec<CellAddress>, message: impl Into<String>) -> Self {
        assert!(!cells.is_empty(), "a finding cites at least one cell");
        let entry = catalog::entry(rule_id);
        Finding {
            rule_id,
            severity,
            cells,
            message: message.into(),
            evidence: BTreeMap::new(),
            remediation: entry.remediation.to_string(),
            catalog: entry.anchor(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.evidence.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_remediation(mut self, text: impl Into<String>) -> Self {
        self.remediation = text.into();
        self
    }

    pub fn primary(&self) -> &CellAddress {
        &self.cells[0]
    }

    pub fn cites(&self, cell: &CellAddress) -> bool {
        self.cells.contains(cell)
    }
}

/// Orders findings by severity (highest first), then by location in
/// workbook sheet order, then by rule and message.
pub fn sort_findings(wb: &Workbook, findings: &mut [Finding]) {
    let sheet_index =
        |name: &str| wb.sheets.iter().position(|s| s.name.eq_ignore_ascii_case(name)).unwrap_or(usize::MAX);
    findings.sort_by(|a, b| {
        let (pa, pb) = (a.primary(), b.primary());
        b.severity
            .cmp(&a.severity)
            .then(sheet_index(&pa.sheet).cmp(&sheet_index(&pb.sheet)))
            .then(pa.sheet.cmp(&pb.sheet))
            .then(pa.row.cmp(&pb.row))
            .then(pa.col.cmp(&pb.col))
            .then(a.rule_id.cmp(&b.rule_id))
            .then(a.message.cmp(&b.message))
            .then(a.cells.cmp(&b.cells))
    });
}
