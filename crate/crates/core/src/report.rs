//! Audit and diff reports with text and JSON renderings.
//!
//! The JSON form is built through `serde_json::Value`, whose object maps keep
//! keys sorted, so identical reports always serialize to identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::rules::{Finding, RuleConfig, RuleId, Severity};

pub const TOOL_NAME: &str = "cellsafe";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A finding tagged with the input it was found in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub input: String,
    #[serde(flatten)]
    pub finding: Finding,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub by_severity: BTreeMap<Severity, usize>,
    pub by_rule: BTreeMap<RuleId, usize>,
}

impl Summary {
    pub fn of<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> Summary {
        let mut s = Summary::default();
        for sev in Severity::ALL {
            s.by_severity.insert(sev, 0);
        }
        for f in findings {
            s.total += 1;
            *s.by_severity.entry(f.severity).or_default() += 1;
            *s.by_rule.entry(f.rule_id).or_default() += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// `audit` or `diff`.
    pub command: String,
    pub inputs: Vec<String>,
    pub config: RuleConfig,
    pub findings: Vec<ReportEntry>,
    pub summary: Summary,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<String>, config: RuleConfig) -> Report {
        Report {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            inputs,
            config,
            findings: Vec::new(),
            summary: Summary::of([]),
        }
    }

    /// Appends findings for one input and refreshes the summary.
    pub fn extend(&mut self, input: &str, findings: impl IntoIterator<Item = Finding>) {
        self.findings.extend(findings.into_iter().map(|finding| ReportEntry { input: input.to_string(), finding }));
        self.summary = Summary::of(self.findings.iter().map(|e| &e.finding));
    }

    /// Drops findings below `min`.
    pub fn filter_min_severity(&mut self, min: Severity) {
        self.findings.retain(|e| e.finding.severity >= min);
        self.summary = Summary::of(self.findings.iter().map(|e| &e.finding));
    }

    pub fn max_severity(&self) -> Option<Severity> {
        self.findings.iter().map(|e| e.finding.severity).max()
    }

    pub fn any_at_least(&self, threshold: Severity) -> bool {
        self.max_severity().is_some_and(|s| s >= threshold)
    }
}

pub fn render_json(report: &Report) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn parse_json(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

/// Human-readable report: findings grouped by severity, highest first, in
/// the order they were produced (which is already by location), followed by
/// a summary block.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let multi = report.inputs.len() > 1;
    for sev in Severity::ALL.into_iter().rev() {
        let group: Vec<_> = report.findings.iter().filter(|e| e.finding.severity == sev).collect();
        if group.is_empty() {
            continue;
        }
        let _ = writeln!(out, "== {} ({}) ==", sev.as_str().to_uppercase(), group.len());
        for e in group {
            let f = &e.finding;
            let location = f.cells.iter().map(|c| c.qualified()).collect::<Vec<_>>().join(", ");
            if multi {
                let _ = write!(out, "{}: ", e.input);
            }
            let _ = writeln!(out, "{:<4} {}: {}", f.rule_id.as_str(), location, f.message);
            for (k, v) in &f.evidence {
                let _ = writeln!(out, "       {k}: {v}");
            }
            let _ = writeln!(out, "       fix: {}", f.remediation);
            let _ = writeln!(out, "       see: {}", f.catalog);
        }
        out.push('\n');
    }
    let s = &report.summary;
    let _ = writeln!(out, "{} {} {}: {}", report.tool, report.version, report.command, report.inputs.join(", "));
    let by_sev = Severity::ALL
        .into_iter()
        .rev()
        .map(|sev| format!("{} {}", s.by_severity.get(&sev).copied().unwrap_or(0), sev))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "{} finding(s): {by_sev}", s.total);
    if !s.by_rule.is_empty() {
        let by_rule = s.by_rule.iter().map(|(r, n)| format!("{r}={n}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "by rule: {by_rule}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{generate, FixtureKind, FixtureSpec};
    use crate::rules::run_all;

    fn pediatric_report() -> Report {
        let cfg = RuleConfig::default();
        let wb = generate(&FixtureSpec::new(FixtureKind::Pediatric));
        let mut r = Report::new("audit", vec!["pediatric.json".into()], cfg.clone());
        r.extend("pediatric.json", run_all(&wb, &cfg));
        r
    }

    #[test]
    fn empty_report_has_only_the_summary() {
        let r = Report::new("audit", vec!["x.xlsx".into()], RuleConfig::default());
        let text = render_text(&r);
        assert!(!text.contains("=="), "{text}");
        assert!(text.contains("0 finding(s): 0 high, 0 warn, 0 info"), "{text}");
    }

    #[test]
    fn summary_matches_findings() {
        let r = pediatric_report();
        assert_eq!(r.summary.total, r.findings.len());
        assert_eq!(r.summary.by_severity.values().sum::<usize>(), r.findings.len());
        assert_eq!(r.summary.by_rule.values().sum::<usize>(), r.findings.len());
    }

    #[test]
    fn json_is_stable_and_round_trips() {
        let r = pediatric_report();
        let a = render_json(&r);
        assert_eq!(a, render_json(&pediatric_report()));
        assert_eq!(parse_json(&a).unwrap(), r);
        let keys: Vec<&str> = a.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn text_groups_by_severity() {
        let text = render_text(&pediatric_report());
        let high = text.find("== HIGH").unwrap();
        let warn = text.find("== WARN").unwrap();
        let info = text.find("== INFO").unwrap();
        assert!(high < warn && warn < info);
        assert!(text.contains("R7a  Calculator!L9"), "{text}");
    }

    #[test]
    fn min_severity_filter_updates_counts() {
        let mut r = pediatric_report();
        r.filter_min_severity(Severity::High);
        assert!(r.findings.iter().all(|e| e.finding.severity == Severity::High));
        assert_eq!(r.summary.total, r.findings.len());
        assert_eq!(r.summary.by_severity[&Severity::Warn], 0);
    }
}
