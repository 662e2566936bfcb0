use std::collections::BTreeSet;

use cellsafe_core::eval::{evaluate, Env, Value};
use cellsafe_core::fixtures::{generate, FixtureKind, FixtureSpec};
use cellsafe_core::formula::parse_formula;
use cellsafe_core::formula::random::random_ast;
use cellsafe_core::number::{int, ratio};
use cellsafe_core::report::{parse_json, render_json, Report};
use cellsafe_core::rules::{diff_workbooks, run_all, RuleConfig, RuleId};
use cellsafe_core::workbook::{
    read_xlsx_bytes, to_json_string, workbook_from_json_str, write_xlsx_bytes, CellContent, NumberFormat, Sheet,
    Workbook,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture_kind() -> impl Strategy<Value = FixtureKind> {
    prop::sample::select(FixtureKind::ALL.to_vec())
}

fn fixture(kind: FixtureKind, seed: u64) -> Workbook {
    generate(&FixtureSpec { seed, ..FixtureSpec::new(kind) })
}

fn cell() -> impl Strategy<Value = CellContent> {
    prop_oneof![
        (-100_000i64..100_000, prop::sample::select(vec![1i64, 10, 100, 1000, 8]))
            .prop_map(|(n, d)| CellContent::number(ratio(n, d))),
        "[ -~]{0,12}".prop_map(CellContent::text),
        any::<bool>().prop_map(CellContent::boolean),
        any::<u64>().prop_map(|seed| {
            let ast = random_ast(&mut ChaCha8Rng::seed_from_u64(seed), 4);
            CellContent::formula(&ast.to_formula())
        }),
        (0u32..=3).prop_map(|d| CellContent::blank().unlocked().with_format(NumberFormat::fixed(d))),
    ]
}

fn workbook() -> impl Strategy<Value = Workbook> {
    let sheet = (any::<bool>(), proptest::collection::btree_map((1u32..30, 1u32..30), cell(), 0..25));
    proptest::collection::vec(sheet, 1..4).prop_map(|sheets| {
        let sheets = sheets
            .into_iter()
            .enumerate()
            .map(|(i, (protected, cells))| {
                let mut s = Sheet::new(format!("Sheet {}", i + 1)).protected(protected);
                for ((col, row), content) in cells {
                    s.set(&cellsafe_core::address::Coord::new(col, row).unwrap().to_a1(), content);
                }
                s
            })
            .collect();
        Workbook::new(sheets).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn audits_and_reports_are_deterministic(kind in fixture_kind(), seed in 0u64..1000) {
        let cfg = RuleConfig::default();
        let wb = fixture(kind, seed);
        let a = run_all(&wb, &cfg);
        prop_assert_eq!(&a, &run_all(&fixture(kind, seed), &cfg));
        let mut report = Report::new("audit", vec![kind.to_string()], cfg);
        report.extend(kind.as_str(), a);
        let text = render_json(&report);
        prop_assert_eq!(&text, &render_json(&report.clone()));
        prop_assert_eq!(parse_json(&text).unwrap(), report);
    }

    #[test]
    fn disabling_rules_only_removes_their_findings(
        kind in fixture_kind(),
        off in proptest::collection::btree_set(prop::sample::select(RuleId::AUDIT.to_vec()), 0..6),
    ) {
        let wb = fixture(kind, 0);
        let all = run_all(&wb, &RuleConfig::default());
        let cfg = RuleConfig { rules: RuleId::ALL.into_iter().filter(|r| !off.contains(r)).collect(), ..RuleConfig::default() };
        let some = run_all(&wb, &cfg);
        let expected: Vec<_> = all.into_iter().filter(|f| !off.contains(&f.rule_id)).collect();
        prop_assert_eq!(some, expected);
    }

    #[test]
    fn a_workbook_does_not_differ_from_itself(kind in fixture_kind(), seed in 0u64..1000) {
        let wb = fixture(kind, seed);
        prop_assert!(diff_workbooks(&wb, &wb.clone()).is_empty());
    }

    #[test]
    fn random_workbooks_survive_both_codecs(wb in workbook()) {
        let json = to_json_string(&wb);
        prop_assert_eq!(&workbook_from_json_str(&json).unwrap(), &wb);
        let bytes = write_xlsx_bytes(&wb).unwrap();
        prop_assert_eq!(read_xlsx_bytes(&bytes).unwrap(), wb.without_meta());
    }

    #[test]
    fn audits_never_panic_on_random_workbooks(wb in workbook()) {
        let findings = run_all(&wb, &RuleConfig::default());
        let rules: BTreeSet<RuleId> = findings.iter().map(|f| f.rule_id).collect();
        prop_assert!(rules.iter().all(|r| RuleId::AUDIT.contains(r)));
        prop_assert!(findings.iter().all(|f| !f.cells.is_empty()));
    }
}

proptest! {
    #[test]
    fn arithmetic_is_exact(a in -10_000i64..10_000, b in -10_000i64..10_000, c in 1i64..10_000) {
        let ast = parse_formula("=A1+B1/C1-A1*C1").unwrap();
        let env = Env::new("S")
            .with("A1", Value::Number(int(a)))
            .with("B1", Value::Number(int(b)))
            .with("C1", Value::Number(int(c)));
        let want = int(a) + ratio(b, c) - int(a * c);
        prop_assert_eq!(evaluate(&ast, &env), Value::Number(want));
    }
}

#[test]
fn tenths_add_up_exactly() {
    let ast = parse_formula("=0.1+0.1+0.1+0.1+0.1+0.1+0.1+0.1+0.1+0.1").unwrap();
    assert_eq!(evaluate(&ast, &Env::new("S")), Value::Number(int(1)));
}
