//! Static analysis of spreadsheet workbooks for clinical calculation hazards.

pub mod address;
pub mod eval;
pub mod fixtures;
pub mod formula;
pub mod graph;
pub mod number;
pub mod report;
pub mod rules;
pub mod workbook;

pub use address::{CellAddress, Coord};
pub use eval::{evaluate, Value, WorkbookEvaluator};
pub use formula::{parse_formula, Expr};
pub use graph::DependencyGraph;
pub use number::Rational;
pub use report::{render_json, render_text, Report};
pub use rules::{diff_workbooks, run_all, Finding, RuleConfig, RuleId, Severity};
pub use workbook::{read_json, read_xlsx, write_json, write_xlsx, CellContent, Sheet, Workbook};
