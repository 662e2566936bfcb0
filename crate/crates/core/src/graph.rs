//! Precedent/dependent relation over formula cells.

use std::collections::{BTreeMap, BTreeSet};

use crate::address::{CellAddress, Coord};
use crate::formula::{parse_formula, CellRef, Expr, ParseError};
use crate::workbook::{NameTarget, Workbook};

/// Ranges covering more cells than this expand only to cells that exist in
/// the workbook.
pub const RANGE_EXPANSION_CAP: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// No formula; referenced by at least one formula.
    Input,
    /// Has a formula and at least one dependent.
    Intermediate,
    /// Has a formula and no dependents.
    Terminal,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Input => "input",
            Role::Intermediate => "intermediate",
            Role::Terminal => "terminal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub cell: CellAddress,
    pub formula: String,
    pub error: ParseError,
}

/// Something the builder could not resolve exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphWarning {
    /// A range too large to expand fully.
    RangeTruncated { cell: CellAddress, range: String, cells: u64 },
    /// A reference to a sheet that does not exist.
    UnknownSheet { cell: CellAddress, sheet: String },
    /// A name with no definition.
    UnknownName { cell: CellAddress, name: String },
}

impl GraphWarning {
    pub fn cell(&self) -> &CellAddress {
        match self {
            GraphWarning::RangeTruncated { cell, .. }
            | GraphWarning::UnknownSheet { cell, .. }
            | GraphWarning::UnknownName { cell, .. } => cell,
        }
    }

    pub fn message(&self) -> String {
        match self {
            GraphWarning::RangeTruncated { range, cells, .. } => {
                format!("range {range} covers {cells} cells; only populated cells were linked")
            }
            GraphWarning::UnknownSheet { sheet, .. } => format!("reference to missing sheet '{sheet}'"),
            GraphWarning::UnknownName { name, .. } => format!("undefined name {name}"),
        }
    }
}

/// A reference resolved against a workbook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Cell(CellAddress),
    Range(CellAddress, CellAddress),
}

/// Resolves a reference written on `sheet`. Sheet names match ignoring case
/// and come back in the workbook's spelling.
pub fn resolve_ref(wb: &Workbook, sheet: &str, r: &CellRef) -> Result<CellAddress, String> {
    let name = r.sheet.as_deref().unwrap_or(sheet);
    wb.canonical_sheet_name(name).map(|canon| CellAddress::new(canon, r.coord)).ok_or_else(|| name.to_string())
}

/// Looks a defined name up on the formula's own sheet first, then on every
/// other sheet in order.
pub fn resolve_name(wb: &Workbook, sheet: &str, name: &str) -> Option<Resolved> {
    let own = wb.sheet(sheet).into_iter();
    let others = wb.sheets.iter().filter(|s| !s.name.eq_ignore_ascii_case(sheet));
    own.chain(others).find_map(|s| {
        s.lookup_name(name).map(|t| match t {
            NameTarget::Cell(c) => Resolved::Cell(CellAddress::new(s.name.clone(), c)),
            NameTarget::Range(a, b) => {
                Resolved::Range(CellAddress::new(s.name.clone(), a), CellAddress::new(s.name.clone(), b))
            }
        })
    })
}

pub fn range_size(a: Coord, b: Coord) -> u64 {
    u64::from(a.col.abs_diff(b.col) + 1) * u64::from(a.row.abs_diff(b.row) + 1)
}

/// Cells covered by a range in row-major order. Ranges above the cap yield
/// only populated cells; the flag reports that.
pub fn expand_range(wb: &Workbook, a: &CellAddress, b: &CellAddress) -> (Vec<CellAddress>, bool) {
    let (lo_col, hi_col) = (a.col.min(b.col), a.col.max(b.col));
    let (lo_row, hi_row) = (a.row.min(b.row), a.row.max(b.row));
    if range_size(a.coord(), b.coord()) <= RANGE_EXPANSION_CAP {
        let cells = (lo_row..=hi_row)
            .flat_map(|row| (lo_col..=hi_col).map(move |col| (col, row)))
            .map(|(col, row)| CellAddress::new(a.sheet.clone(), Coord { col, row }))
            .collect();
        return (cells, false);
    }
    let cells = wb
        .sheet(&a.sheet)
        .map(|s| {
            s.cells
                .keys()
                .filter(|c| (lo_col..=hi_col).contains(&c.col) && (lo_row..=hi_row).contains(&c.row))
                .map(|c| CellAddress::new(a.sheet.clone(), *c))
                .collect()
        })
        .unwrap_or_default();
    (cells, true)
}

#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    asts: BTreeMap<CellAddress, Expr>,
    precedents: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
    dependents: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
    formula_cells: BTreeSet<CellAddress>,
    sheet_order: Vec<String>,
    pub parse_failures: Vec<ParseFailure>,
    pub warnings: Vec<GraphWarning>,
}

impl DependencyGraph {
    pub fn build(wb: &Workbook) -> DependencyGraph {
        let mut g =
            DependencyGraph { sheet_order: wb.sheets.iter().map(|s| s.name.clone()).collect(), ..Default::default() };
        for (addr, cell) in wb.cells() {
            let Some(text) = &cell.formula else { continue };
            g.formula_cells.insert(addr.clone());
            match parse_formula(text) {
                Ok(ast) => {
                    g.precedents.entry(addr.clone()).or_default();
                    let refs = g.references(wb, &addr, &ast);
                    for r in refs {
                        g.dependents.entry(r.clone()).or_default().insert(addr.clone());
                        g.precedents.get_mut(&addr).expect("inserted").insert(r);
                    }
                    g.asts.insert(addr, ast);
                }
                Err(error) => g.parse_failures.push(ParseFailure { cell: addr, formula: format!("={text}"), error }),
            }
        }
        g
    }

    fn references(&mut self, wb: &Workbook, at: &CellAddress, ast: &Expr) -> BTreeSet<CellAddress> {
        let mut out = BTreeSet::new();
        let mut pending: Vec<(Resolved, String)> = Vec::new();
        ast.walk(&mut |e| match e {
            Expr::Ref(r) => match resolve_ref(wb, &at.sheet, r) {
                Ok(a) => pending.push((Resolved::Cell(a), r.to_string())),
                Err(sheet) => self.warnings.push(GraphWarning::UnknownSheet { cell: at.clone(), sheet }),
            },
            Expr::Range(a, b) => match (resolve_ref(wb, &at.sheet, a), resolve_ref(wb, &at.sheet, b)) {
                (Ok(x), Ok(y)) => pending.push((Resolved::Range(x, y), format!("{a}:{}", b.coord))),
                (Err(sheet), _) | (_, Err(sheet)) => {
                    self.warnings.push(GraphWarning::UnknownSheet { cell: at.clone(), sheet })
                }
            },
            Expr::Name(n) => match resolve_name(wb, &at.sheet, n) {
                Some(r) => pending.push((r, n.clone())),
                None => self.warnings.push(GraphWarning::UnknownName { cell: at.clone(), name: n.clone() }),
            },
            _ => {}
        });
        for (resolved, text) in pending {
            match resolved {
                Resolved::Cell(a) => {
                    out.insert(a);
                }
                Resolved::Range(a, b) => {
                    let (cells, truncated) = expand_range(wb, &a, &b);
                    if truncated {
                        self.warnings.push(GraphWarning::RangeTruncated {
                            cell: at.clone(),
                            range: text,
                            cells: range_size(a.coord(), b.coord()),
                        });
                    }
                    out.extend(cells);
                }
            }
        }
        out
    }

    /// Parsed formula of a cell, if it has one that parses.
    pub fn ast(&self, cell: &CellAddress) -> Option<&Expr> {
        self.asts.get(cell)
    }

    pub fn asts(&self) -> impl Iterator<Item = (&CellAddress, &Expr)> {
        self.asts.iter()
    }

    pub fn has_formula(&self, cell: &CellAddress) -> bool {
        self.formula_cells.contains(cell)
    }

    /// Cells the formula in `cell` references directly.
    pub fn precedents(&self, cell: &CellAddress) -> impl Iterator<Item = &CellAddress> {
        self.precedents.get(cell).into_iter().flatten()
    }

    /// Formula cells that reference `cell` directly.
    pub fn dependents(&self, cell: &CellAddress) -> impl Iterator<Item = &CellAddress> {
        self.dependents.get(cell).into_iter().flatten()
    }

    /// Every cell that holds a parsed formula or is referenced by one.
    pub fn nodes(&self) -> BTreeSet<&CellAddress> {
        self.asts.keys().chain(self.dependents.keys()).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.precedents.values().map(BTreeSet::len).sum()
    }

    pub fn role(&self, cell: &CellAddress) -> Option<Role> {
        let has_dependents = self.dependents.get(cell).is_some_and(|d| !d.is_empty());
        if self.asts.contains_key(cell) || (self.formula_cells.contains(cell) && has_dependents) {
            Some(if has_dependents { Role::Intermediate } else { Role::Terminal })
        } else if has_dependents {
            Some(Role::Input)
        } else {
            None
        }
    }

    /// Transitive precedents (not including `cell` itself unless it lies on
    /// a cycle through itself).
    pub fn transitive_precedents(&self, cell: &CellAddress) -> BTreeSet<CellAddress> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&CellAddress> = self.precedents(cell).collect();
        while let Some(c) = stack.pop() {
            if seen.insert(c.clone()) {
                stack.extend(self.precedents(c));
            }
        }
        seen
    }

    /// Sort key: (sheet position in the workbook, row, column).
    pub fn order_key(&self, cell: &CellAddress) -> (usize, u32, u32) {
        let idx = self.sheet_order.iter().position(|s| s == &cell.sheet).unwrap_or(usize::MAX);
        (idx, cell.row, cell.col)
    }

    /// Formula cells with no dependents, in (sheet, row, column) order.
    pub fn dead_formulas(&self) -> Vec<CellAddress> {
        let mut out: Vec<CellAddress> =
            self.asts.keys().filter(|c| self.role(c) == Some(Role::Terminal)).cloned().collect();
        out.sort_by_key(|c| self.order_key(c));
        out
    }

    /// All elementary cycles among formula cells. Each cycle starts at its
    /// least cell and follows references (a cell, then a cell it refers to).
    pub fn detect_cycles(&self) -> Vec<Vec<CellAddress>> {
        let nodes: Vec<&CellAddress> = self.asts.keys().collect();
        let index: BTreeMap<&CellAddress, usize> = nodes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let adj: Vec<Vec<usize>> =
            nodes.iter().map(|c| self.precedents(c).filter_map(|p| index.get(p).copied()).collect()).collect();
        let comp = strongly_connected(&adj);
        let mut cycles = Vec::new();
        for start in 0..nodes.len() {
            let mut path = vec![start];
            let mut on_path = vec![false; nodes.len()];
            on_path[start] = true;
            self.extend_cycles(&adj, &comp, start, start, &mut path, &mut on_path, &mut cycles, &nodes);
        }
        cycles
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_cycles(
        &self,
        adj: &[Vec<usize>],
        comp: &[usize],
        start: usize,
        at: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<CellAddress>>,
        nodes: &[&CellAddress],
    ) {
        const MAX_CYCLES: usize = 10_000;
        for &next in &adj[at] {
            if out.len() >= MAX_CYCLES {
                return;
            }
            if next == start {
                out.push(path.iter().map(|&i| nodes[i].clone()).collect());
            } else if next > start && comp[next] == comp[start] && !on_path[next] {
                on_path[next] = true;
                path.push(next);
                self.extend_cycles(adj, comp, start, next, path, on_path, out, nodes);
                path.pop();
                on_path[next] = false;
            }
        }
    }
}

/// Tarjan's algorithm, iterative. Returns a component id per node.
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut comps = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut edge)) = work.last_mut() {
            if *edge == 0 && index[v] == usize::MAX {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*edge) {
                *edge += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp[w] = comps;
                    if w == v {
                        break;
                    }
                }
                comps += 1;
            }
        }
    }
    comp
}
