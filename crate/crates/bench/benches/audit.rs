use std::hint::black_box;

use cellsafe_core::fixtures::{generate, FixtureKind, FixtureSpec, ATROPINE_FORMULA};
use cellsafe_core::formula::parse_formula;
use cellsafe_core::graph::DependencyGraph;
use cellsafe_core::rules::{diff_workbooks, run_all, RuleConfig};
use cellsafe_core::workbook::{read_xlsx_bytes, to_json_string, write_xlsx_bytes};
use criterion::{criterion_group, criterion_main, Criterion};

fn parse(c: &mut Criterion) {
    c.bench_function("parse atropine formula", |b| b.iter(|| parse_formula(black_box(ATROPINE_FORMULA))));
}

fn audit(c: &mut Criterion) {
    let cfg = RuleConfig::default();
    let mut group = c.benchmark_group("audit");
    for kind in FixtureKind::ALL {
        let wb = generate(&FixtureSpec::new(kind));
        group.bench_function(kind.as_str(), |b| b.iter(|| run_all(black_box(&wb), &cfg)));
    }
    group.finish();
}

fn graph_and_diff(c: &mut Criterion) {
    let wb = generate(&FixtureSpec::new(FixtureKind::Pediatric));
    let clean = generate(&FixtureSpec::new(FixtureKind::CleanPediatric));
    c.bench_function("dependency graph", |b| b.iter(|| DependencyGraph::build(black_box(&wb))));
    c.bench_function("diff", |b| b.iter(|| diff_workbooks(black_box(&wb), black_box(&clean))));
}

fn io(c: &mut Criterion) {
    let wb = generate(&FixtureSpec::new(FixtureKind::Pediatric));
    let bytes = write_xlsx_bytes(&wb).unwrap();
    let mut group = c.benchmark_group("io");
    group.bench_function("write xlsx", |b| b.iter(|| write_xlsx_bytes(black_box(&wb)).unwrap()));
    group.bench_function("read xlsx", |b| b.iter(|| read_xlsx_bytes(black_box(&bytes)).unwrap()));
    group.bench_function("write json", |b| b.iter(|| to_json_string(black_box(&wb))));
    group.finish();
}

criterion_group!(benches, parse, audit, graph_and_diff, io);
criterion_main!(benches);
