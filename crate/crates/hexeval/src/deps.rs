//! Atom and rule dependency graphs, strongly connected components, and
//! the splitting-set checks built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::external::{InputType, OracleRegistry};
use crate::syntax::{unifies, Atom, ExternalAtom, Literal, Program, Rule, RuleId};
use crate::HexError;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DepKind {
    Monotonic,
    Nonmonotonic,
}

impl DepKind {
    pub fn label(self) -> &'static str {
        match self {
            DepKind::Monotonic => "m",
            DepKind::Nonmonotonic => "n",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AtomDepKind {
    M,
    N,
    ExtM,
    ExtN,
}

impl AtomDepKind {
    pub fn label(self) -> &'static str {
        match self {
            AtomDepKind::M => "m",
            AtomDepKind::N => "n",
            AtomDepKind::ExtM => "e_m",
            AtomDepKind::ExtN => "e_n",
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AtomNode {
    Ordinary(Atom),
    External(ExternalAtom),
}

impl fmt::Display for AtomNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomNode::Ordinary(a) => a.fmt(f),
            AtomNode::External(e) => e.fmt(f),
        }
    }
}

/// If `e` takes the extension of `b`'s predicate as an input, returns
/// whether that dependency is monotonic.
pub fn external_depends_on(
    e: &ExternalAtom,
    b: &Atom,
    reg: &OracleRegistry,
) -> Result<Option<bool>, HexError> {
    let def = reg.check_atom(e)?;
    let feeds = e.inputs.iter().zip(&def.signature.inputs).any(|(t, ty)| {
        matches!(ty, InputType::Pred(n) if *n == b.arity() && t.as_const() == Some(&b.predicate))
    });
    Ok(feeds.then_some(def.monotonic))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomDependencyGraph {
    pub nodes: BTreeSet<AtomNode>,
    pub edges: BTreeSet<(AtomNode, AtomNode, AtomDepKind)>,
}

impl AtomDependencyGraph {
    pub fn has_edge(&self, from: &AtomNode, to: &AtomNode, kind: AtomDepKind) -> bool {
        self.edges.contains(&(from.clone(), to.clone(), kind))
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph atoms {\n");
        write_atom_graph_body(self, &mut s, "");
        s.push_str("}\n");
        s
    }
}

fn write_atom_graph_body(g: &AtomDependencyGraph, s: &mut String, prefix: &str) {
    let ids: BTreeMap<&AtomNode, usize> = g.nodes.iter().enumerate().map(|(k, n)| (n, k)).collect();
    for (n, k) in &ids {
        let _ = writeln!(s, "  {prefix}a{k} [label={:?}];", n.to_string());
    }
    for (a, b, kind) in &g.edges {
        let _ = writeln!(
            s,
            "  {prefix}a{} -> {prefix}a{} [label=\"{}\"];",
            ids[a],
            ids[b],
            kind.label()
        );
    }
}

fn is_edb_fact(r: &Rule) -> bool {
    r.is_fact() && r.head.len() == 1 && r.head[0].is_ground()
}

/// Atom dependency graph over the atoms of all rules except single-atom
/// ground facts.
pub fn atom_dependencies(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<AtomDependencyGraph, HexError> {
    let mut g = AtomDependencyGraph::default();
    let rules: Vec<&Rule> = p.rules.iter().filter(|r| !is_edb_fact(r)).collect();
    let node_of = |l: &Literal| match l {
        Literal::Ordinary(a) => Some(AtomNode::Ordinary(a.clone())),
        Literal::External(e) => Some(AtomNode::External(e.clone())),
        Literal::Builtin(_) => None,
    };
    for r in &rules {
        for a in &r.head {
            g.nodes.insert(AtomNode::Ordinary(a.clone()));
        }
        g.nodes.extend(r.body().filter_map(node_of));
    }
    let add = |g: &mut AtomDependencyGraph, a: AtomNode, b: AtomNode, k: AtomDepKind| {
        if g.nodes.contains(&a) && g.nodes.contains(&b) {
            g.edges.insert((a, b, k));
        }
    };
    let heads: BTreeSet<&Atom> = p.rules.iter().flat_map(|r| &r.head).collect();
    for r in &rules {
        for h in &r.head {
            let hn = AtomNode::Ordinary(h.clone());
            for b in r.pos.iter().filter_map(node_of) {
                add(&mut g, hn.clone(), b, AtomDepKind::M);
            }
            for b in r.neg.iter().filter_map(node_of) {
                add(&mut g, hn.clone(), b, AtomDepKind::N);
            }
            for h2 in &r.head {
                if h2 != h {
                    add(
                        &mut g,
                        hn.clone(),
                        AtomNode::Ordinary(h2.clone()),
                        AtomDepKind::M,
                    );
                }
            }
        }
        for l in r.body() {
            match l {
                Literal::Ordinary(a) => {
                    for h in &heads {
                        if unifies(a, h) {
                            add(
                                &mut g,
                                AtomNode::Ordinary(a.clone()),
                                AtomNode::Ordinary((*h).clone()),
                                AtomDepKind::M,
                            );
                        }
                    }
                }
                Literal::External(e) => {
                    for h in &heads {
                        if let Some(mono) = external_depends_on(e, h, reg)? {
                            let k = if mono {
                                AtomDepKind::ExtM
                            } else {
                                AtomDepKind::ExtN
                            };
                            add(
                                &mut g,
                                AtomNode::External(e.clone()),
                                AtomNode::Ordinary((*h).clone()),
                                k,
                            );
                        }
                    }
                }
                Literal::Builtin(_) => {}
            }
        }
    }
    Ok(g)
}

/// Rule dependency graph: `(r, s, kind)` means r depends on s.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleDependencyGraph {
    pub num_rules: usize,
    pub edges: BTreeSet<(RuleId, RuleId, DepKind)>,
}

impl RuleDependencyGraph {
    pub fn has_edge(&self, r: RuleId, s: RuleId, kind: DepKind) -> bool {
        self.edges.contains(&(r, s, kind))
    }

    pub fn depends(&self, r: RuleId, s: RuleId) -> bool {
        self.has_edge(r, s, DepKind::Monotonic) || self.has_edge(r, s, DepKind::Nonmonotonic)
    }

    /// Targets of r's outgoing edges, with kinds.
    pub fn successors(&self, r: RuleId) -> impl Iterator<Item = (RuleId, DepKind)> + '_ {
        self.edges
            .range((r, 0, DepKind::Monotonic)..)
            .take_while(move |e| e.0 == r)
            .map(|e| (e.1, e.2))
    }

    pub fn to_dot(&self, p: &Program) -> String {
        let mut s = String::from("digraph rules {\n");
        write_rule_graph_body(self, p, &mut s, "");
        s.push_str("}\n");
        s
    }
}

fn write_rule_graph_body(g: &RuleDependencyGraph, p: &Program, s: &mut String, prefix: &str) {
    for (k, r) in p.rules.iter().enumerate() {
        let _ = writeln!(s, "  {prefix}r{k} [label={:?}];", r.to_string());
    }
    for (r, t, kind) in &g.edges {
        let _ = writeln!(
            s,
            "  {prefix}r{r} -> {prefix}r{t} [label=\"{}\"];",
            kind.label()
        );
    }
}

/// Both graphs in one DOT document, as two clusters.
pub fn dependencies_to_dot(
    p: &Program,
    rules: &RuleDependencyGraph,
    atoms: &AtomDependencyGraph,
) -> String {
    let mut s =
        String::from("digraph dependencies {\n  subgraph cluster_rules {\n  label=\"rules\";\n");
    write_rule_graph_body(rules, p, &mut s, "");
    s.push_str("  }\n  subgraph cluster_atoms {\n  label=\"atoms\";\n");
    write_atom_graph_body(atoms, &mut s, "");
    s.push_str("  }\n}\n");
    s
}

pub fn rule_dependencies(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<RuleDependencyGraph, HexError> {
    let mut g = RuleDependencyGraph {
        num_rules: p.len(),
        edges: BTreeSet::new(),
    };
    for (ri, r) in p.rules.iter().enumerate() {
        for (si, s) in p.rules.iter().enumerate() {
            if ri == si {
                continue;
            }
            for h in &s.head {
                for l in &r.pos {
                    match l {
                        Literal::Ordinary(a) if unifies(a, h) => {
                            g.edges.insert((ri, si, DepKind::Monotonic));
                        }
                        Literal::External(e) => match external_depends_on(e, h, reg)? {
                            Some(true) => {
                                g.edges.insert((ri, si, DepKind::Monotonic));
                            }
                            Some(false) => {
                                g.edges.insert((ri, si, DepKind::Nonmonotonic));
                            }
                            None => {}
                        },
                        _ => {}
                    }
                }
                for l in &r.neg {
                    let hit = match l {
                        Literal::Ordinary(a) => unifies(a, h),
                        Literal::External(e) => external_depends_on(e, h, reg)?.is_some(),
                        Literal::Builtin(_) => false,
                    };
                    if hit {
                        g.edges.insert((ri, si, DepKind::Nonmonotonic));
                    }
                }
                if r.head.iter().any(|a| unifies(a, h)) {
                    g.edges.insert((ri, si, DepKind::Monotonic));
                    g.edges.insert((si, ri, DepKind::Monotonic));
                }
            }
        }
    }
    Ok(g)
}

/// Strongly connected components of a directed graph on `0..n` (Tarjan).
/// Components come out dependencies-first: if u → v and they lie in
/// different components, v's component precedes u's.
pub fn tarjan_scc(n: usize, succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        succ: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    let mut st = State {
        succ,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    // Iterative DFS to stay clear of recursion limits.
    for root in 0..n {
        if st.index[root].is_some() {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        st.index[root] = Some(st.next);
        st.low[root] = st.next;
        st.next += 1;
        st.stack.push(root);
        st.on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = work.last_mut() {
            if *k < st.succ[v].len() {
                let w = st.succ[v][*k];
                *k += 1;
                match st.index[w] {
                    None => {
                        st.index[w] = Some(st.next);
                        st.low[w] = st.next;
                        st.next += 1;
                        st.stack.push(w);
                        st.on_stack[w] = true;
                        work.push((w, 0));
                    }
                    Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                    Some(_) => {}
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    st.low[parent] = st.low[parent].min(st.low[v]);
                }
                if Some(st.low[v]) == st.index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = st.stack.pop().expect("component root is on the stack");
                        st.on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    st.out.push(comp);
                }
            }
        }
    }
    st.out
}

/// Components of the rule dependency graph and the edges between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condensation {
    pub components: Vec<Vec<RuleId>>,
    pub edges: BTreeSet<(usize, usize)>,
}

pub fn scc_condensation(g: &RuleDependencyGraph) -> Condensation {
    let mut succ = vec![Vec::new(); g.num_rules];
    for &(r, s, _) in &g.edges {
        if succ[r].last() != Some(&s) {
            succ[r].push(s);
        }
    }
    let components = tarjan_scc(g.num_rules, &succ);
    let mut comp_of = vec![0; g.num_rules];
    for (k, c) in components.iter().enumerate() {
        for &r in c {
            comp_of[r] = k;
        }
    }
    let edges = g
        .edges
        .iter()
        .map(|&(r, s, _)| (comp_of[r], comp_of[s]))
        .filter(|(a, b)| a != b)
        .collect();
    Condensation { components, edges }
}

/// R ⊆ P is closed under dependencies within P.
pub fn is_rule_splitting_set(
    g: &RuleDependencyGraph,
    program: &BTreeSet<RuleId>,
    r: &BTreeSet<RuleId>,
) -> bool {
    r.is_subset(program)
        && r.iter().all(|&x| {
            g.successors(x)
                .all(|(s, _)| !program.contains(&s) || r.contains(&s))
        })
}

/// B is a generalized bottom of P with respect to the splitting set R.
pub fn is_generalized_bottom(
    p: &Program,
    g: &RuleDependencyGraph,
    program: &BTreeSet<RuleId>,
    r: &BTreeSet<RuleId>,
    b: &BTreeSet<RuleId>,
) -> bool {
    if !is_rule_splitting_set(g, program, r) || !r.is_subset(b) || !b.is_subset(program) {
        return false;
    }
    b.difference(r).all(|&c| {
        p.rules[c].is_constraint()
            && g.successors(c)
                .all(|(s, k)| k != DepKind::Nonmonotonic || !program.contains(&s) || b.contains(&s))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn scc_on_small_graph() {
        // 0 -> 1 -> 2 -> 1, 3 isolated
        let succ = vec![vec![1], vec![2], vec![1], vec![]];
        let comps = tarjan_scc(4, &succ);
        assert_eq!(comps, vec![vec![1, 2], vec![0], vec![3]]);
    }

    #[test]
    fn negative_body_gives_n_edge() {
        let p = parse_program("a :- not b.\nb.\n").unwrap();
        let g = rule_dependencies(&p, &OracleRegistry::new()).unwrap();
        assert!(g.has_edge(0, 1, DepKind::Nonmonotonic));
        assert!(!g.has_edge(0, 1, DepKind::Monotonic));
    }

    #[test]
    fn head_overlap_is_mutual() {
        let p = parse_program("p(X) :- q(X).\np(a) | r.\n").unwrap();
        let g = rule_dependencies(&p, &OracleRegistry::new()).unwrap();
        assert!(g.has_edge(0, 1, DepKind::Monotonic) && g.has_edge(1, 0, DepKind::Monotonic));
    }

    #[test]
    fn fact_only_atom_graph_is_empty() {
        let p = parse_program("a.\nb(c).\n").unwrap();
        let g = atom_dependencies(&p, &OracleRegistry::new()).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn splitting_checks() {
        let p = parse_program("a.\nb :- a.\n:- b, not a.\n").unwrap();
        let g = rule_dependencies(&p, &OracleRegistry::new()).unwrap();
        let all: BTreeSet<RuleId> = (0..3).collect();
        let r: BTreeSet<RuleId> = [0].into();
        assert!(is_rule_splitting_set(&g, &all, &r));
        assert!(!is_rule_splitting_set(&g, &all, &[1].into()));
        assert!(is_generalized_bottom(&p, &g, &all, &[0, 1].into(), &all));
        // The constraint depends nonmonotonically on rule 0 which is outside B.
        let p2 = parse_program("a :- c.\nb.\n:- b, not a.\nc.\n").unwrap();
        let g2 = rule_dependencies(&p2, &OracleRegistry::new()).unwrap();
        let all2: BTreeSet<RuleId> = (0..4).collect();
        assert!(!is_generalized_bottom(
            &p2,
            &g2,
            &all2,
            &[1].into(),
            &[1, 2].into()
        ));
    }
}
