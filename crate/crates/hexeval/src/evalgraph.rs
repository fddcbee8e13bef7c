//! Evaluation graphs: acyclic graphs of units (sets of rules) that fix the
//! order in which parts of a program are solved.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::deps::{is_generalized_bottom, scc_condensation, DepKind, RuleDependencyGraph};
use crate::syntax::{ground_heads, Interpretation, Program, RuleId, Sym};

pub type UnitId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationGraph {
    pub program: Program,
    pub units: Vec<BTreeSet<RuleId>>,
    /// `(u, v)`: u depends on v, so v is evaluated first.
    pub edges: BTreeSet<(UnitId, UnitId)>,
    pub final_unit: Option<UnitId>,
    /// Ground facts given to every unit as input instead of being placed
    /// in a unit.
    pub edb: Interpretation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.condition, self.message)
    }
}

fn violation(condition: &'static str, message: String) -> Violation {
    Violation { condition, message }
}

impl EvaluationGraph {
    pub fn new(
        program: Program,
        units: Vec<BTreeSet<RuleId>>,
        edges: BTreeSet<(UnitId, UnitId)>,
    ) -> Self {
        EvaluationGraph {
            program,
            units,
            edges,
            final_unit: None,
            edb: Interpretation::new(),
        }
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    /// Units u depends on, ascending.
    pub fn preds(&self, u: UnitId) -> Vec<UnitId> {
        self.edges
            .range((u, 0)..)
            .take_while(|e| e.0 == u)
            .map(|e| e.1)
            .collect()
    }

    /// Units depending on v, ascending.
    pub fn dependents(&self, v: UnitId) -> Vec<UnitId> {
        self.edges
            .iter()
            .filter(|e| e.1 == v)
            .map(|e| e.0)
            .collect()
    }

    pub fn unit_program(&self, u: UnitId) -> Program {
        self.program.subprogram(&self.units[u])
    }

    pub fn units_containing(&self, r: RuleId) -> Vec<UnitId> {
        (0..self.units.len())
            .filter(|&u| self.units[u].contains(&r))
            .collect()
    }

    /// Units reachable from u by one or more edges.
    pub fn units_below(&self, u: UnitId) -> BTreeSet<UnitId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<UnitId> = self.preds(u).into();
        while let Some(v) = queue.pop_front() {
            if seen.insert(v) {
                queue.extend(self.preds(v));
            }
        }
        seen
    }

    pub fn rules_of<'a>(&self, units: impl IntoIterator<Item = &'a UnitId>) -> BTreeSet<RuleId> {
        units
            .into_iter()
            .flat_map(|&u| self.units[u].iter().copied())
            .collect()
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.units.len();
        let mut indeg = vec![0; n];
        for &(_, v) in &self.edges {
            indeg[v] += 1;
        }
        let mut queue: Vec<UnitId> = (0..n).filter(|&u| indeg[u] == 0).collect();
        let mut seen = 0;
        while let Some(u) = queue.pop() {
            seen += 1;
            for v in self.preds(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        seen == n
    }

    /// A topological order in which every unit follows the units it
    /// depends on; ties broken by lowest id.
    pub fn evaluation_order(&self) -> Vec<UnitId> {
        let n = self.units.len();
        let mut remaining: Vec<usize> = (0..n).map(|u| self.preds(u).len()).collect();
        let mut done = vec![false; n];
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let Some(u) = (0..n).find(|&u| !done[u] && remaining[u] == 0) else {
                break;
            };
            done[u] = true;
            out.push(u);
            for w in self.dependents(u) {
                remaining[w] -= 1;
            }
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph evaluation {\n  node [shape=box];\n");
        for (u, rules) in self.units.iter().enumerate() {
            let body: Vec<String> = rules
                .iter()
                .map(|&r| self.program.rules[r].to_string())
                .collect();
            let name = if Some(u) == self.final_unit {
                format!("u{u} (final)")
            } else {
                format!("u{u}")
            };
            let label = std::iter::once(name)
                .chain(body)
                .collect::<Vec<_>>()
                .join("\\n");
            let _ = writeln!(s, "  u{u} [label=\"{}\"];", label.replace('"', "\\\""));
        }
        for (u, v) in &self.edges {
            let _ = writeln!(s, "  u{u} -> u{v};");
        }
        s.push_str("}\n");
        s
    }
}

/// u^< and u^≤ as rule sets.
pub fn unit_closures(e: &EvaluationGraph, u: UnitId) -> (BTreeSet<RuleId>, BTreeSet<RuleId>) {
    let below = e.rules_of(&e.units_below(u));
    let mut upto = below.clone();
    upto.extend(e.units[u].iter().copied());
    (below, upto)
}

/// Checks acyclicity and the four structural conditions: every rule is
/// covered, every non-constraint lies in exactly one unit, nonmonotonic
/// dependencies are edges between all involved units, and monotonic
/// dependencies are covered by at least one unit of the depending rule.
pub fn validate_evaluation_graph(
    e: &EvaluationGraph,
    deps: &RuleDependencyGraph,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if !e.is_acyclic() {
        out.push(violation("acyclic", "the unit graph has a cycle".into()));
    }
    for &(u, v) in &e.edges {
        if u >= e.units.len() || v >= e.units.len() {
            out.push(violation(
                "edges",
                format!("edge ({u},{v}) refers to a missing unit"),
            ));
        }
    }
    for (r, rule) in e.program.rules.iter().enumerate() {
        let n = e.units_containing(r).len();
        if n == 0 {
            out.push(violation("coverage", format!("rule {r} is in no unit")));
        }
        if !rule.is_constraint() && n > 1 {
            out.push(violation(
                "unique",
                format!("non-constraint rule {r} is in {n} units"),
            ));
        }
    }
    for &(r, s, kind) in &deps.edges {
        let ur = e.units_containing(r);
        let us = e.units_containing(s);
        match kind {
            DepKind::Nonmonotonic => {
                for &u in &ur {
                    for &v in &us {
                        if u != v && !e.edges.contains(&(u, v)) {
                            out.push(violation(
                                "nonmonotonic",
                                format!("rule {r} depends nonmonotonically on rule {s}: missing edge u{u} -> u{v}"),
                            ));
                        }
                    }
                }
            }
            DepKind::Monotonic => {
                let covered = ur
                    .iter()
                    .any(|&u| us.iter().all(|&v| v == u || e.edges.contains(&(u, v))));
                if !ur.is_empty() && !covered {
                    out.push(violation(
                        "monotonic",
                        format!("rule {r} depends on rule {s} but no unit of {r} reaches all units of {s}"),
                    ));
                }
            }
        }
    }
    out
}

/// Ground heads of distinct units are disjoint over `consts`.
pub fn check_disjoint_heads(e: &EvaluationGraph, consts: &BTreeSet<Sym>) -> Vec<Violation> {
    let heads: Vec<BTreeSet<_>> = (0..e.units.len())
        .map(|u| ground_heads(&e.unit_program(u), consts))
        .collect();
    let mut out = Vec::new();
    for u in 0..heads.len() {
        for v in u + 1..heads.len() {
            if let Some(a) = heads[u].intersection(&heads[v]).next() {
                out.push(violation(
                    "disjoint heads",
                    format!("u{u} and u{v} both derive {a}"),
                ));
            }
        }
    }
    out
}

/// For u: u^< is a generalized bottom of u^≤ with respect to its
/// non-constraints, and for each predecessor u', u'^≤ is a generalized
/// bottom of u^< with respect to the non-constraints of u'^≤.
pub fn check_closure_bottoms(
    e: &EvaluationGraph,
    deps: &RuleDependencyGraph,
    u: UnitId,
) -> Vec<Violation> {
    let non_constraints = |rs: &BTreeSet<RuleId>| -> BTreeSet<RuleId> {
        rs.iter()
            .copied()
            .filter(|&r| !e.program.rules[r].is_constraint())
            .collect()
    };
    let mut out = Vec::new();
    let (below, upto) = unit_closures(e, u);
    if !is_generalized_bottom(&e.program, deps, &upto, &non_constraints(&below), &below) {
        out.push(violation(
            "closure bottom",
            format!("u{u}^< is not a generalized bottom of u{u}^<="),
        ));
    }
    for p in e.preds(u) {
        let (_, pupto) = unit_closures(e, p);
        if !is_generalized_bottom(&e.program, deps, &below, &non_constraints(&pupto), &pupto) {
            out.push(violation(
                "predecessor bottom",
                format!("u{p}^<= is not a generalized bottom of u{u}^<"),
            ));
        }
    }
    out
}

/// Adds a unit without rules that depends on every other unit.
pub fn add_final_unit(e: &EvaluationGraph) -> EvaluationGraph {
    let mut g = e.clone();
    let f = g.units.len();
    g.units.push(BTreeSet::new());
    for u in 0..f {
        g.edges.insert((f, u));
    }
    g.final_unit = Some(f);
    g
}

/// Units w ≠ v reachable from v along two paths that share only v and w.
pub fn compute_fai(e: &EvaluationGraph, v: UnitId) -> BTreeSet<UnitId> {
    e.units_below(v)
        .into_iter()
        .filter(|&w| vertex_disjoint_paths(e, v, w) >= 2)
        .collect()
}

/// Maximum number of internally vertex-disjoint paths from s to t, capped
/// at 2.
fn vertex_disjoint_paths(e: &EvaluationGraph, s: UnitId, t: UnitId) -> usize {
    // Split each unit x into x_in = 2x and x_out = 2x + 1 with capacity 1,
    // except for s and t.
    let n = e.units.len();
    let mut cap: BTreeMap<(usize, usize), i32> = BTreeMap::new();
    for x in 0..n {
        let c = if x == s || x == t { 2 } else { 1 };
        cap.insert((2 * x, 2 * x + 1), c);
    }
    for &(a, b) in &e.edges {
        *cap.entry((2 * a + 1, 2 * b)).or_insert(0) += 1;
    }
    let (src, sink) = (2 * s + 1, 2 * t);
    let mut flow = 0;
    while flow < 2 {
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([src]);
        let mut visited = BTreeSet::from([src]);
        while let Some(x) = queue.pop_front() {
            if x == sink {
                break;
            }
            let nexts: Vec<usize> = cap
                .range((x, 0)..)
                .take_while(|(k, _)| k.0 == x)
                .filter(|(_, &c)| c > 0)
                .map(|(k, _)| k.1)
                .collect();
            for y in nexts {
                if visited.insert(y) {
                    prev.insert(y, x);
                    queue.push_back(y);
                }
            }
        }
        if !visited.contains(&sink) {
            break;
        }
        let mut y = sink;
        while y != src {
            let x = prev[&y];
            *cap.get_mut(&(x, y)).expect("edge on path") -= 1;
            *cap.entry((y, x)).or_insert(0) += 1;
            y = x;
        }
        flow += 1;
    }
    flow
}

/// Everything in one unit.
pub fn heuristic_monolithic(p: &Program) -> EvaluationGraph {
    EvaluationGraph::new(p.clone(), vec![(0..p.len()).collect()], BTreeSet::new())
}

/// One unit per strongly connected component of the rule dependency graph.
pub fn heuristic_trivial(p: &Program, deps: &RuleDependencyGraph) -> EvaluationGraph {
    let c = scc_condensation(deps);
    EvaluationGraph::new(
        p.clone(),
        c.components
            .into_iter()
            .map(|c| c.into_iter().collect())
            .collect(),
        c.edges,
    )
}

/// Starts from the component graph and repeatedly merges two units that
/// depend on the same nonempty set of units, or that are depended on by the
/// same nonempty set of units, unless a rule with external atoms in one of
/// them depends on a rule in the other. Merges that would create a cycle
/// are skipped; pairs are tried in order of unit ids.
pub fn heuristic_greedy(p: &Program, deps: &RuleDependencyGraph) -> EvaluationGraph {
    let mut g = heuristic_trivial(p, deps);
    'outer: loop {
        let n = g.units.len();
        let preds: Vec<BTreeSet<UnitId>> =
            (0..n).map(|u| g.preds(u).into_iter().collect()).collect();
        let succs: Vec<BTreeSet<UnitId>> = (0..n)
            .map(|u| g.dependents(u).into_iter().collect())
            .collect();
        for a in 0..n {
            for b in a + 1..n {
                let same_deps = !preds[a].is_empty() && preds[a] == preds[b];
                let same_dependents = !succs[a].is_empty() && succs[a] == succs[b];
                if !(same_deps || same_dependents) {
                    continue;
                }
                if external_dependency_between(&g, deps, a, b)
                    || external_dependency_between(&g, deps, b, a)
                {
                    continue;
                }
                let merged = merge_units(&g, a, b);
                if merged.is_acyclic() {
                    g = merged;
                    continue 'outer;
                }
            }
        }
        return g;
    }
}

/// Some rule with external atoms in unit a depends on a rule in unit b.
fn external_dependency_between(
    g: &EvaluationGraph,
    deps: &RuleDependencyGraph,
    a: UnitId,
    b: UnitId,
) -> bool {
    g.units[a]
        .iter()
        .filter(|&&r| g.program.rules[r].has_external())
        .any(|&r| deps.successors(r).any(|(s, _)| g.units[b].contains(&s)))
}

/// Merges unit b into unit a (a < b) and renumbers the units after b.
fn merge_units(g: &EvaluationGraph, a: UnitId, b: UnitId) -> EvaluationGraph {
    let renum = |u: UnitId| {
        if u == b {
            a
        } else if u > b {
            u - 1
        } else {
            u
        }
    };
    let mut units = g.units.clone();
    let moved = units.remove(b);
    units[a].extend(moved);
    let edges = g
        .edges
        .iter()
        .map(|&(u, v)| (renum(u), renum(v)))
        .filter(|(u, v)| u != v)
        .collect();
    EvaluationGraph {
        units,
        edges,
        final_unit: g.final_unit.map(renum),
        ..g.clone()
    }
}

/// Copies each constraint into every further unit that defines one of the
/// rules it depends on, provided all its nonmonotonic dependencies lie at or
/// below that unit. Edges for those nonmonotonic dependencies are added.
pub fn push_shareable_constraints(
    e: &EvaluationGraph,
    deps: &RuleDependencyGraph,
) -> EvaluationGraph {
    let mut g = e.clone();
    for (c, rule) in e.program.rules.iter().enumerate() {
        if !rule.is_constraint() {
            continue;
        }
        let targets: Vec<(RuleId, DepKind)> = deps.successors(c).collect();
        if targets.is_empty() {
            continue;
        }
        for u in 0..g.units.len() {
            if Some(u) == g.final_unit || g.units[u].contains(&c) {
                continue;
            }
            if !targets.iter().any(|(s, _)| g.units[u].contains(s)) {
                continue;
            }
            let (_, upto) = unit_closures(&g, u);
            let n_targets: Vec<RuleId> = targets
                .iter()
                .filter(|(_, k)| *k == DepKind::Nonmonotonic)
                .map(|(s, _)| *s)
                .collect();
            if !n_targets.iter().all(|s| upto.contains(s)) {
                continue;
            }
            g.units[u].insert(c);
            for s in n_targets {
                for v in g.units_containing(s) {
                    if v != u {
                        g.edges.insert((u, v));
                    }
                }
            }
        }
    }
    g
}

/// Removes a constraint from the units it was originally placed in once a
/// shared copy sits in a unit that contains, or directly depends on, every
/// rule the constraint depends on. Units left empty are removed.
pub fn drop_covered_constraints(
    original: &EvaluationGraph,
    shared: &EvaluationGraph,
    deps: &RuleDependencyGraph,
) -> EvaluationGraph {
    let mut g = shared.clone();
    for (c, rule) in g.program.rules.iter().enumerate() {
        if !rule.is_constraint() {
            continue;
        }
        let targets: Vec<RuleId> = deps.successors(c).map(|(s, _)| s).collect();
        let home = original.units_containing(c);
        let covered = g.units_containing(c).into_iter().any(|u| {
            !home.contains(&u)
                && targets.iter().all(|&s| {
                    g.units.iter().enumerate().all(|(v, rules)| {
                        !rules.contains(&s) || v == u || g.edges.contains(&(u, v))
                    })
                })
        });
        if covered {
            for u in home {
                g.units[u].remove(&c);
            }
        }
    }
    remove_empty_units(&g)
}

fn remove_empty_units(g: &EvaluationGraph) -> EvaluationGraph {
    let keep: Vec<UnitId> = (0..g.units.len())
        .filter(|&u| !g.units[u].is_empty() || Some(u) == g.final_unit)
        .collect();
    let mut renum = vec![usize::MAX; g.units.len()];
    for (k, &u) in keep.iter().enumerate() {
        renum[u] = k;
    }
    let units = keep.iter().map(|&u| g.units[u].clone()).collect();
    let edges = g
        .edges
        .iter()
        .filter(|(u, v)| renum[*u] != usize::MAX && renum[*v] != usize::MAX)
        .map(|&(u, v)| (renum[u], renum[v]))
        .collect();
    EvaluationGraph {
        units,
        edges,
        final_unit: g.final_unit.map(|u| renum[u]),
        ..g.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> EvaluationGraph {
        EvaluationGraph::new(
            Program::default(),
            vec![BTreeSet::new(); n],
            edges.iter().copied().collect(),
        )
    }

    #[test]
    fn fai_on_diamond_with_shortcut() {
        // a=0 b=1 c=2 d=3 e=4 f=5 g=6
        let g = graph(
            7,
            &[
                (0, 1),
                (1, 2),
                (2, 4),
                (4, 5),
                (0, 3),
                (3, 4),
                (4, 6),
                (1, 3),
            ],
        );
        assert_eq!(compute_fai(&g, 0), [3, 4].into());
        assert_eq!(compute_fai(&g, 1), [4].into());
        for v in 2..7 {
            assert!(compute_fai(&g, v).is_empty());
        }
    }

    #[test]
    fn evaluation_order_is_topological() {
        let g = graph(3, &[(0, 2), (1, 0)]);
        assert_eq!(g.evaluation_order(), vec![2, 0, 1]);
        assert!(g.is_acyclic());
        assert!(!graph(2, &[(0, 1), (1, 0)]).is_acyclic());
    }

    #[test]
    fn final_unit_depends_on_all() {
        let g = add_final_unit(&graph(2, &[(1, 0)]));
        assert_eq!(g.final_unit, Some(2));
        assert_eq!(g.preds(2), vec![0, 1]);
    }
}
