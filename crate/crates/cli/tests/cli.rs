use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellsafe_core::fixtures::{generate, inject_fault, FaultKind, FixtureKind, FixtureSpec};
use cellsafe_core::report::parse_json;
use cellsafe_core::rules::{RuleId, Severity};
use cellsafe_core::workbook::{read_xlsx, write_json, write_xlsx, Workbook};
use tempfile::TempDir;

fn cellsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellsafe")).args(args).env_remove("CELLSAFE_CONFIG").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn save(dir: &TempDir, name: &str, wb: &Workbook) -> String {
    let path = dir.path().join(name);
    if name.ends_with(".json") {
        write_json(wb, &path).unwrap();
    } else {
        write_xlsx(wb, &path).unwrap();
    }
    path.display().to_string()
}

fn fixture(dir: &TempDir, kind: FixtureKind, ext: &str) -> String {
    save(dir, &format!("{kind}.{ext}"), &generate(&FixtureSpec::new(kind)))
}

#[test]
fn clean_fixture_passes() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::CleanPediatric, "xlsx");
    let out = cellsafe(&["audit", &path, "--fail-on", "warn"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn pediatric_fixture_fails_with_the_clonidine_unit_finding() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Pediatric, "xlsx");
    let out = cellsafe(&["audit", &path, "--format", "json"]);
    assert_eq!(code(&out), 1);
    let report = parse_json(&stdout(&out)).unwrap();
    let r7a: Vec<_> = report.findings.iter().filter(|e| e.finding.rule_id == RuleId::R7a).collect();
    assert_eq!(r7a.len(), 1);
    assert_eq!(r7a[0].finding.primary().a1(), "L9");
    assert_eq!(r7a[0].input, path);
}

#[test]
fn fail_on_threshold_controls_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::CleanPediatric, "json");
    assert_eq!(code(&cellsafe(&["audit", &path, "--fail-on", "info"])), 1);
    assert_eq!(code(&cellsafe(&["audit", &path, "--fail-on", "high"])), 0);
}

#[test]
fn min_severity_hides_findings_without_changing_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Pediatric, "json");
    let out = cellsafe(&["audit", &path, "--format", "json", "--min-severity", "high", "--fail-on", "warn"]);
    assert_eq!(code(&out), 1);
    let report = parse_json(&stdout(&out)).unwrap();
    assert!(!report.findings.is_empty());
    assert!(report.findings.iter().all(|e| e.finding.severity == Severity::High));
}

#[test]
fn unreadable_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let bogus = dir.path().join("notes.xlsx");
    std::fs::write(&bogus, "just text").unwrap();
    let out = cellsafe(&["audit", bogus.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("zip"));
    assert!(out.stdout.is_empty());

    let missing = dir.path().join("missing.xlsx");
    assert_eq!(code(&cellsafe(&["audit", missing.to_str().unwrap()])), 2);
}

#[test]
fn bad_flags_exit_2() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Bayes, "json");
    assert_eq!(code(&cellsafe(&["audit", &path, "--rules", "R42"])), 2);
    assert_eq!(code(&cellsafe(&["audit", &path, "--fail-on", "fatal"])), 2);
    assert_eq!(code(&cellsafe(&["audit"])), 2);
}

#[test]
fn rules_flag_only_removes_findings() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Pediatric, "json");
    let all = parse_json(&stdout(&cellsafe(&["audit", &path, "--format", "json"]))).unwrap();
    let some = parse_json(&stdout(&cellsafe(&["audit", &path, "--format", "json", "--rules", "R1,R7"]))).unwrap();
    let kept: Vec<_> =
        all.findings.iter().filter(|e| matches!(e.finding.rule_id, RuleId::R1 | RuleId::R7a | RuleId::R7b)).collect();
    assert!(!kept.is_empty());
    assert_eq!(some.findings.iter().collect::<Vec<_>>(), kept);
}

#[test]
fn config_file_and_environment_fallback() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Pediatric, "json");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rules": ["R4"]}"#).unwrap();

    let via_flag = cellsafe(&["audit", &path, "--format", "json", "--config", cfg.to_str().unwrap()]);
    let via_env = Command::new(env!("CARGO_BIN_EXE_cellsafe"))
        .args(["audit", &path, "--format", "json"])
        .env("CELLSAFE_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(via_flag.stdout, via_env.stdout);
    let report = parse_json(&stdout(&via_flag)).unwrap();
    assert_eq!(report.summary.by_rule.keys().copied().collect::<Vec<_>>(), vec![RuleId::R4]);

    std::fs::write(&cfg, r#"{"rulez": []}"#).unwrap();
    assert_eq!(code(&cellsafe(&["audit", &path, "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn suppress_flag_silences_dead_formula_findings() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::CleanPediatric, "json");
    let out = cellsafe(&["audit", &path, "--format", "json", "--suppress", "Calculator!L20"]);
    let report = parse_json(&stdout(&out)).unwrap();
    assert!(report.findings.iter().all(|e| e.finding.rule_id != RuleId::R6));
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Bayes, "xlsx");
    let a = cellsafe(&["audit", &path, "--format", "json"]);
    let b = cellsafe(&["audit", &path, "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn several_inputs_are_reported_in_argument_order() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<String> = FixtureKind::ALL.iter().map(|k| fixture(&dir, *k, "json")).collect();
    let mut args = vec!["audit", "--format", "json"];
    args.extend(paths.iter().map(String::as_str));
    let report = parse_json(&stdout(&cellsafe(&args))).unwrap();
    assert_eq!(report.inputs, paths);
    let mut order: Vec<&str> = report.findings.iter().map(|e| e.input.as_str()).collect();
    order.dedup();
    assert_eq!(order, paths.iter().map(String::as_str).collect::<Vec<_>>());
}

#[test]
fn diff_of_identical_files_is_empty() {
    let dir = TempDir::new().unwrap();
    let path = fixture(&dir, FixtureKind::Pediatric, "xlsx");
    let out = cellsafe(&["diff", &path, &path, "--format", "json"]);
    assert_eq!(code(&out), 0);
    assert!(parse_json(&stdout(&out)).unwrap().findings.is_empty());
}

#[test]
fn diff_cites_the_injected_cell() {
    let dir = TempDir::new().unwrap();
    let wb = generate(&FixtureSpec::new(FixtureKind::Pediatric));
    let old = save(&dir, "old.xlsx", &wb);
    for kind in [FaultKind::OverwriteFormulaWithConstant, FaultKind::TypoConstant, FaultKind::DeleteValidation] {
        let (bad, rec) = inject_fault(&wb, kind, 3).unwrap();
        let new = save(&dir, &format!("{kind}.xlsx"), &bad);
        let out = cellsafe(&["diff", &old, &new, "--format", "json"]);
        assert_eq!(code(&out), 1, "{kind}");
        let report = parse_json(&stdout(&out)).unwrap();
        assert!(report.findings.iter().any(|e| e.finding.cites(&rec.target)), "{kind}");
    }
}

#[test]
fn diff_reports_a_renamed_sheet() {
    let dir = TempDir::new().unwrap();
    let wb = generate(&FixtureSpec::new(FixtureKind::Bayes));
    let mut renamed = wb.clone();
    renamed.sheets[0].name = "Posterior".into();
    let (a, b) = (save(&dir, "a.json", &wb), save(&dir, "b.json", &renamed));
    let out = cellsafe(&["diff", &a, &b, "--format", "json"]);
    assert_eq!(code(&out), 1);
    let report = parse_json(&stdout(&out)).unwrap();
    assert!(report.findings.iter().all(|e| e.finding.rule_id == RuleId::D0));
    assert_eq!(report.findings.len(), 2);
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/pediatric.json")
}

#[test]
fn generated_json_fixture_matches_the_golden_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.json");
    let run = cellsafe(&["fixtures", "gen", "pediatric", out.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&run), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(golden()).unwrap());
}

#[test]
fn generated_xlsx_fixture_is_readable() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bayes.xlsx");
    assert_eq!(code(&cellsafe(&["fixtures", "gen", "bayes", out.to_str().unwrap(), "--format", "xlsx"])), 0);
    let wb = read_xlsx(&out).unwrap();
    assert_eq!(wb.sheets[0].name, "Bayes");
}

#[test]
fn unknown_fixture_kind_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(code(&cellsafe(&["fixtures", "gen", "adult", out.to_str().unwrap()])), 2);
    assert!(!out.exists());
}
