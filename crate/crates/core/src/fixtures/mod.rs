//! Deterministic case-study workbooks and a fault injector for exercising
//! the detectors.
//!
//! Cells carry a `provenance` metadata entry: `published` for content taken
//! verbatim from the printed pre-operative dose table and its atropine
//! formula, `synthesized` for everything filled in around it (including the
//! formulas of the other dose rows). Tests must not treat synthesized
//! constants as ground truth.

mod bayes;
mod faults;
mod pediatric;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bayes::{bayes_posttest, gen_bayes, BayesError, BayesLayout, BAYES_LAYOUT};
pub use faults::{inject_fault, FaultError, FaultKind, FaultRecord};
pub use pediatric::{
    gen_clean_pediatric, gen_pediatric, DoseRow, ATROPINE_FORMULA, BSA_CELL, DOSE_ROWS, DOSE_SHEET, WEIGHT_CELL,
};

use crate::workbook::{CellContent, Workbook};

pub const PROVENANCE: &str = "provenance";
pub const PUBLISHED: &str = "published";
pub const SYNTHESIZED: &str = "synthesized";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Pediatric,
    Bayes,
    CleanPediatric,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 3] = [FixtureKind::Pediatric, FixtureKind::Bayes, FixtureKind::CleanPediatric];

    pub fn as_str(self) -> &'static str {
        match self {
            FixtureKind::Pediatric => "pediatric",
            FixtureKind::Bayes => "bayes",
            FixtureKind::CleanPediatric => "clean-pediatric",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown fixture {s:?} (expected pediatric, bayes or clean-pediatric)"))
    }
}

/// What to generate. The seed only affects the Bayes inputs; seed 0 gives
/// prevalence 0.1, sensitivity 0.9 and specificity 0.8.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub seed: u64,
    /// Include the unused body-surface-area formula (pediatric only).
    pub include_bsa: bool,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind) -> Self {
        FixtureSpec { kind, seed: 0, include_bsa: true }
    }
}

/// Generates the workbook described by `spec`.
pub fn generate(spec: &FixtureSpec) -> Workbook {
    match spec.kind {
        FixtureKind::Pediatric => gen_pediatric(spec),
        FixtureKind::CleanPediatric => gen_clean_pediatric(spec),
        FixtureKind::Bayes => gen_bayes(spec),
    }
}

pub(crate) fn published(content: CellContent) -> CellContent {
    content.with_meta(PROVENANCE, PUBLISHED)
}

pub(crate) fn synthesized(content: CellContent) -> CellContent {
    content.with_meta(PROVENANCE, SYNTHESIZED)
}
