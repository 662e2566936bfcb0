use std::collections::{BTreeMap, BTreeSet};

use cellsafe_core::address::{CellAddress, Coord};
use cellsafe_core::graph::DependencyGraph;
use cellsafe_core::number::int;
use cellsafe_core::workbook::{CellContent, Sheet, Workbook};
use proptest::prelude::*;

const SHEETS: [&str; 2] = ["Main", "Other Data"];

/// Node `i` lives on sheet `i % 2`, row `i / 2 + 1`, column B.
fn addr(i: usize) -> CellAddress {
    CellAddress::new(SHEETS[i % 2], Coord::new(2, (i / 2 + 1) as u32).unwrap())
}

fn reference(from: usize, to: usize) -> String {
    let target = addr(to);
    if from % 2 == to % 2 {
        target.a1()
    } else {
        target.qualified()
    }
}

/// A workbook whose node `i` is a formula over `edges[i]`, or a number when
/// it has no outgoing edges.
fn build(edges: &BTreeMap<usize, BTreeSet<usize>>, n: usize) -> Workbook {
    let mut sheets: Vec<Sheet> = SHEETS.iter().map(|s| Sheet::new(*s)).collect();
    for i in 0..n {
        let refs = &edges[&i];
        let content = if refs.is_empty() {
            CellContent::number(int(i as i64))
        } else {
            let body: Vec<String> = refs.iter().map(|&j| reference(i, j)).collect();
            CellContent::formula(&format!("={}", body.join("+")))
        };
        sheets[i % 2].set(&addr(i).a1(), content);
    }
    Workbook::new(sheets).unwrap()
}

fn dag() -> impl Strategy<Value = (usize, BTreeMap<usize, BTreeSet<usize>>)> {
    (2usize..40).prop_flat_map(|n| {
        let per_node: Vec<_> = (0..n).map(|i| proptest::collection::btree_set(0..i.max(1), 0..=i.min(4))).collect();
        per_node.prop_map(move |sets| {
            let edges =
                sets.into_iter().enumerate().map(|(i, s)| (i, s.into_iter().filter(|&j| j < i).collect())).collect();
            (n, edges)
        })
    })
}

proptest! {
    #[test]
    fn edges_and_dead_formulas_match_the_construction((n, edges) in dag()) {
        let wb = build(&edges, n);
        let g = DependencyGraph::build(&wb);
        for i in 0..n {
            let got: BTreeSet<CellAddress> = g.precedents(&addr(i)).cloned().collect();
            let want: BTreeSet<CellAddress> = edges[&i].iter().map(|&j| addr(j)).collect();
            prop_assert_eq!(got, want);
        }
        let referenced: BTreeSet<usize> = edges.values().flatten().copied().collect();
        let want_dead: BTreeSet<CellAddress> =
            (0..n).filter(|i| !edges[i].is_empty() && !referenced.contains(i)).map(addr).collect();
        let got_dead: BTreeSet<CellAddress> = g.dead_formulas().into_iter().collect();
        prop_assert_eq!(got_dead, want_dead);
        prop_assert!(g.detect_cycles().is_empty());
    }

    #[test]
    fn a_back_edge_creates_a_reported_cycle((n, mut edges) in dag(), pick in any::<prop::sample::Index>()) {
        let with_refs: Vec<usize> = (0..n).filter(|i| !edges[i].is_empty()).collect();
        prop_assume!(!with_refs.is_empty());
        let top = with_refs[pick.index(with_refs.len())];
        let low = *edges[&top].iter().next().unwrap();
        // low -> top closes the loop top -> low.
        edges.get_mut(&low).unwrap().insert(top);
        let g = DependencyGraph::build(&build(&edges, n));
        let cycles = g.detect_cycles();
        prop_assert!(cycles.iter().any(|c| c.contains(&addr(top)) && c.contains(&addr(low))));
        for cycle in &cycles {
            for (k, cell) in cycle.iter().enumerate() {
                let next = &cycle[(k + 1) % cycle.len()];
                prop_assert!(g.precedents(cell).any(|p| p == next), "{} does not refer to {}", cell, next);
            }
        }
    }
}
