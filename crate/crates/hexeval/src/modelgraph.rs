//! Answer set graphs over an evaluation graph, batch model building, the
//! demand-driven answer set stream, and model assembly from a complete
//! graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::evalgraph::{compute_fai, unit_closures, EvaluationGraph, UnitId, Violation};
use crate::external::OracleRegistry;
use crate::grounding::{ground_fixpoint, ground_hex, DEFAULT_MAX_ITERATIONS};
use crate::solver::{check_answer_set, evaluate_unit_bounded, AnswerSetIter, SolveStats};
use crate::syntax::{Interpretation, Program, RuleId};
use crate::HexError;

pub type VertexId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VertexKind {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub unit: UnitId,
    pub kind: VertexKind,
    pub int: Interpretation,
    /// Input vertices point to one output vertex per predecessor unit;
    /// output vertices point to the input vertex they were computed from.
    pub succ: Vec<VertexId>,
}

/// Vertices are numbered from 0; `label` prints them from m1.
#[derive(Clone, Debug)]
pub struct AnswerSetGraph {
    pub vertices: Vec<Vertex>,
    preds: Vec<Vec<UnitId>>,
    fai: Vec<BTreeSet<UnitId>>,
    /// Output vertices reachable from each vertex, grouped by unit.
    reach: Vec<BTreeMap<UnitId, BTreeSet<VertexId>>>,
    plus: Vec<Interpretation>,
    complete_units: BTreeSet<UnitId>,
}

pub fn label(v: VertexId) -> String {
    format!("m{}", v + 1)
}

impl AnswerSetGraph {
    pub fn new(e: &EvaluationGraph) -> Self {
        let n = e.num_units();
        AnswerSetGraph {
            vertices: Vec::new(),
            preds: (0..n).map(|u| e.preds(u)).collect(),
            fai: (0..n).map(|u| compute_fai(e, u)).collect(),
            reach: Vec::new(),
            plus: Vec::new(),
            complete_units: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn fai(&self, u: UnitId) -> &BTreeSet<UnitId> {
        &self.fai[u]
    }

    pub fn vertices_at(&self, u: UnitId, kind: VertexKind) -> Vec<VertexId> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].unit == u && self.vertices[v].kind == kind)
            .collect()
    }

    /// int⁺(m): the union of int over all vertices reachable from m.
    pub fn expanded_interpretation(&self, m: VertexId) -> &Interpretation {
        &self.plus[m]
    }

    pub fn mark_complete(&mut self, u: UnitId) {
        self.complete_units.insert(u);
    }

    pub fn is_complete(&self, u: UnitId) -> bool {
        self.complete_units.contains(&u)
    }

    fn push(&mut self, v: Vertex) -> VertexId {
        let id = self.vertices.len();
        let mut reach: BTreeMap<UnitId, BTreeSet<VertexId>> = BTreeMap::new();
        let mut plus = v.int.clone();
        for &s in &v.succ {
            for (u, ms) in &self.reach[s] {
                reach.entry(*u).or_default().extend(ms);
            }
            plus = plus.union(&self.plus[s]);
        }
        if v.kind == VertexKind::Output {
            reach.entry(v.unit).or_default().insert(id);
        }
        self.vertices.push(v);
        self.reach.push(reach);
        self.plus.push(plus);
        id
    }

    fn check_join_args(&self, u: UnitId, models: &[VertexId]) -> Result<(), HexError> {
        let preds = &self.preds[u];
        if models.len() != preds.len() {
            return Err(HexError::JoinUndefined(format!(
                "unit u{u} has {} predecessors, {} models given",
                preds.len(),
                models.len()
            )));
        }
        for (m, p) in models.iter().zip(preds) {
            let v = self
                .vertices
                .get(*m)
                .ok_or_else(|| HexError::JoinUndefined(format!("no vertex {}", label(*m))))?;
            if v.kind != VertexKind::Output || v.unit != *p {
                return Err(HexError::JoinUndefined(format!(
                    "{} is not an output model at u{p}",
                    label(*m)
                )));
            }
        }
        Ok(())
    }

    /// m1 ⋈ ... ⋈ mk for unit u, or `None` when some first ancestor
    /// intersection unit of u is reached at two different output models.
    pub fn join(&self, u: UnitId, models: &[VertexId]) -> Result<Option<Interpretation>, HexError> {
        self.check_join_args(u, models)?;
        for w in &self.fai[u] {
            let reached: BTreeSet<VertexId> = models
                .iter()
                .flat_map(|&m| self.reach[m].get(w).into_iter().flatten().copied())
                .collect();
            if reached.len() != 1 {
                return Ok(None);
            }
        }
        Ok(Some(
            models.iter().fold(Interpretation::new(), |acc, &m| {
                acc.union(&self.vertices[m].int)
            }),
        ))
    }

    pub fn add_i_interpretation(
        &mut self,
        u: UnitId,
        models: &[VertexId],
    ) -> Result<VertexId, HexError> {
        let int = self.join(u, models)?.ok_or_else(|| {
            HexError::JoinUndefined(
                models
                    .iter()
                    .map(|&m| label(m))
                    .collect::<Vec<_>>()
                    .join(" ⋈ "),
            )
        })?;
        let v = Vertex {
            unit: u,
            kind: VertexKind::Input,
            int,
            succ: models.to_vec(),
        };
        self.ensure_unique(&v)?;
        Ok(self.push(v))
    }

    pub fn add_o_interpretation(
        &mut self,
        u: UnitId,
        input: VertexId,
        int: Interpretation,
    ) -> Result<VertexId, HexError> {
        match self.vertices.get(input) {
            Some(v) if v.unit == u && v.kind == VertexKind::Input => {}
            _ => {
                return Err(HexError::JoinUndefined(format!(
                    "{} is not an input model at u{u}",
                    label(input)
                )));
            }
        }
        let v = Vertex {
            unit: u,
            kind: VertexKind::Output,
            int,
            succ: vec![input],
        };
        self.ensure_unique(&v)?;
        Ok(self.push(v))
    }

    fn ensure_unique(&self, v: &Vertex) -> Result<(), HexError> {
        let mut plus = v.int.clone();
        for &s in &v.succ {
            plus = plus.union(&self.plus[s]);
        }
        let clash = self
            .vertices
            .iter()
            .enumerate()
            .any(|(k, w)| w.unit == v.unit && w.kind == v.kind && self.plus[k] == plus);
        if clash {
            Err(HexError::DuplicateExpandedInterpretation(v.unit))
        } else {
            Ok(())
        }
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph models {\n");
        for (k, v) in self.vertices.iter().enumerate() {
            let kind = if v.kind == VertexKind::Input {
                "i"
            } else {
                "o"
            };
            let _ = writeln!(
                s,
                "  m{} [label=\"{}: {kind}@u{} {}\"];",
                k + 1,
                label(k),
                v.unit,
                v.int.to_string().replace('"', "\\\"")
            );
        }
        for (k, v) in self.vertices.iter().enumerate() {
            for t in &v.succ {
                let _ = writeln!(s, "  m{} -> m{};", k + 1, t + 1);
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Structural conditions on an answer set graph, plus (with `semantic`)
/// that every int⁺ is an answer set of the matching closure of the
/// evaluation graph and that input models are the union of their
/// successors.
pub fn validate_answer_set_graph(
    a: &AnswerSetGraph,
    e: &EvaluationGraph,
    reg: &OracleRegistry,
    semantic: bool,
) -> Result<Vec<Violation>, HexError> {
    let mut out = Vec::new();
    let mut bad =
        |condition: &'static str, message: String| out.push(Violation { condition, message });
    for (k, v) in a.vertices.iter().enumerate() {
        match v.kind {
            VertexKind::Output => {
                let ok = v.succ.len() == 1 && {
                    let w = &a.vertices[v.succ[0]];
                    w.unit == v.unit && w.kind == VertexKind::Input
                };
                if !ok {
                    bad(
                        "output successor",
                        format!("{} must point to one input model at its unit", label(k)),
                    );
                }
            }
            VertexKind::Input => {
                let units: Vec<UnitId> = v.succ.iter().map(|&s| a.vertices[s].unit).collect();
                let all_out = v
                    .succ
                    .iter()
                    .all(|&s| a.vertices[s].kind == VertexKind::Output);
                if !all_out || units != e.preds(v.unit) {
                    bad(
                        "input successors",
                        format!(
                            "{} must point to one output model per predecessor unit",
                            label(k)
                        ),
                    );
                }
                for (u, ms) in &a.reach[k] {
                    if ms.len() != 1 {
                        bad(
                            "foundedness",
                            format!("{} reaches {} output models at u{u}", label(k), ms.len()),
                        );
                    }
                }
            }
        }
    }
    let mut seen: HashMap<(UnitId, bool, &Interpretation), VertexId> = HashMap::new();
    for (k, v) in a.vertices.iter().enumerate() {
        if let Some(prev) = seen.insert((v.unit, v.kind == VertexKind::Input, &a.plus[k]), k) {
            bad(
                "uniqueness",
                format!(
                    "{} and {} share an expanded interpretation",
                    label(prev),
                    label(k)
                ),
            );
        }
    }
    if semantic {
        let mut grounded: HashMap<BTreeSet<RuleId>, Program> = HashMap::new();
        for (k, v) in a.vertices.iter().enumerate() {
            let (below, upto) = unit_closures(e, v.unit);
            let rules = if v.kind == VertexKind::Input {
                below
            } else {
                upto
            };
            if !grounded.contains_key(&rules) {
                let g = ground_hex(&e.program.subprogram(&rules).with_facts(&e.edb), reg)?;
                grounded.insert(rules.clone(), g);
            }
            if !check_answer_set(&grounded[&rules], &a.plus[k].union(&e.edb), reg)? {
                bad(
                    "answer set",
                    format!("int+ of {} is not an answer set of its closure", label(k)),
                );
            }
            if v.kind == VertexKind::Input {
                let joined = v.succ.iter().fold(Interpretation::new(), |acc, &s| {
                    acc.union(&a.vertices[s].int)
                });
                if joined != v.int {
                    bad(
                        "input union",
                        format!(
                            "int of {} differs from the union of its successors",
                            label(k)
                        ),
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Counters collected while evaluating an evaluation graph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub units: usize,
    pub evaluations_per_unit: Vec<usize>,
    /// Partial or complete join tuples tested for definedness.
    pub joins_attempted: u64,
    pub joins_defined: u64,
    pub ground_rules: usize,
    pub solver: SolveStats,
    /// Oracle calls during grounding and solving.
    pub oracle_calls: u64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Validate the whole answer set graph, semantically, after each unit.
    pub validate_each_step: bool,
    /// Bound on grounding iterations per unit evaluation.
    pub max_ground_iter: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            validate_each_step: false,
            max_ground_iter: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl BuildOptions {
    /// `HEXEVAL_DEBUG_VALIDATE=1` turns on per-step validation.
    pub fn from_env() -> Self {
        BuildOptions {
            validate_each_step: std::env::var("HEXEVAL_DEBUG_VALIDATE").is_ok_and(|v| v == "1"),
            ..Default::default()
        }
    }
}

pub struct BuildResult {
    pub answer_sets: Vec<Interpretation>,
    pub graph: AnswerSetGraph,
    pub stats: RunStats,
}

/// All defined joins for u, as tuples of output vertices in predecessor
/// order, enumerated depth-first with pruning at first ancestor
/// intersection units.
fn defined_joins(a: &AnswerSetGraph, u: UnitId, stats: &mut RunStats) -> Vec<Vec<VertexId>> {
    let preds = a.preds[u].clone();
    let candidates: Vec<Vec<VertexId>> = preds
        .iter()
        .map(|&p| a.vertices_at(p, VertexKind::Output))
        .collect();
    let fai = a.fai[u].clone();
    let mut out = Vec::new();
    let mut chosen: Vec<VertexId> = Vec::new();
    let mut at: BTreeMap<UnitId, VertexId> = BTreeMap::new();
    fn rec(
        a: &AnswerSetGraph,
        candidates: &[Vec<VertexId>],
        fai: &BTreeSet<UnitId>,
        chosen: &mut Vec<VertexId>,
        at: &mut BTreeMap<UnitId, VertexId>,
        out: &mut Vec<Vec<VertexId>>,
        stats: &mut RunStats,
    ) {
        let depth = chosen.len();
        if depth == candidates.len() {
            out.push(chosen.clone());
            return;
        }
        for &m in &candidates[depth] {
            stats.joins_attempted += 1;
            let mut added = Vec::new();
            let mut ok = true;
            for w in fai {
                let Some(ms) = a.reach[m].get(w) else {
                    continue;
                };
                if ms.len() != 1 {
                    ok = false;
                    break;
                }
                let x = *ms.iter().next().expect("one element");
                match at.get(w) {
                    Some(&y) if y != x => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        at.insert(*w, x);
                        added.push(*w);
                    }
                }
            }
            if ok {
                chosen.push(m);
                rec(a, candidates, fai, chosen, at, out, stats);
                chosen.pop();
            }
            for w in added {
                at.remove(&w);
            }
        }
    }
    rec(a, &candidates, &fai, &mut chosen, &mut at, &mut out, stats);
    out
}

fn final_unit(e: &EvaluationGraph) -> Result<UnitId, HexError> {
    e.final_unit
        .ok_or_else(|| HexError::InvalidEvaluationGraph("the graph has no final unit".into()))
}

/// Builds the answer set graph unit by unit, in evaluation order, and
/// returns the input models of the final unit.
pub fn build_answer_sets(
    e: &EvaluationGraph,
    reg: &OracleRegistry,
    opts: BuildOptions,
) -> Result<BuildResult, HexError> {
    let start = std::time::Instant::now();
    let calls = reg.oracle_calls();
    let fin = final_unit(e)?;
    let mut a = AnswerSetGraph::new(e);
    let mut stats = RunStats {
        units: e.num_units(),
        evaluations_per_unit: vec![0; e.num_units()],
        ..Default::default()
    };
    for u in e.evaluation_order() {
        let inputs: Vec<VertexId> = if a.preds[u].is_empty() {
            vec![a.add_i_interpretation(u, &[])?]
        } else {
            let joins = defined_joins(&a, u, &mut stats);
            stats.joins_defined += joins.len() as u64;
            joins
                .iter()
                .map(|js| a.add_i_interpretation(u, js))
                .collect::<Result<_, _>>()?
        };
        if u == fin {
            a.mark_complete(u);
            stats.oracle_calls = reg.oracle_calls() - calls;
            stats.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
            let answer_sets = inputs
                .iter()
                .map(|&m| a.vertices[m].int.union(&e.edb))
                .collect();
            return Ok(BuildResult {
                answer_sets,
                graph: a,
                stats,
            });
        }
        let unit = e.unit_program(u);
        for m in inputs {
            let res = evaluate_unit_bounded(
                &unit,
                &a.vertices[m].int.union(&e.edb),
                reg,
                opts.max_ground_iter,
            )?;
            stats.evaluations_per_unit[u] += 1;
            stats.ground_rules += res.ground_rules;
            stats.solver += res.stats;
            for o in res.outputs {
                a.add_o_interpretation(u, m, o)?;
            }
        }
        a.mark_complete(u);
        if opts.validate_each_step {
            let v = validate_answer_set_graph(&a, e, reg, true)?;
            if !v.is_empty() {
                return Err(HexError::ValidationFailed(
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join("; "),
                ));
            }
        }
    }
    Err(HexError::InvalidEvaluationGraph(
        "the final unit was never reached".into(),
    ))
}

/// Answer sets assembled from a complete answer set graph: one output model
/// per non-final unit, each consistent with the models chosen below it.
pub fn answer_sets_from_complete_graph(
    a: &AnswerSetGraph,
    e: &EvaluationGraph,
) -> Result<BTreeSet<Interpretation>, HexError> {
    let fin = final_unit(e)?;
    let order: Vec<UnitId> = e
        .evaluation_order()
        .into_iter()
        .filter(|&u| u != fin)
        .collect();
    if let Some(u) = order.iter().find(|&&u| !a.is_complete(u)) {
        return Err(HexError::IncompleteGraph(format!(
            "unit u{u} has not been evaluated"
        )));
    }
    let outputs: Vec<Vec<VertexId>> = order
        .iter()
        .map(|&u| a.vertices_at(u, VertexKind::Output))
        .collect();
    let mut chosen: BTreeMap<UnitId, VertexId> = BTreeMap::new();
    let mut out = BTreeSet::new();
    fn rec(
        a: &AnswerSetGraph,
        order: &[UnitId],
        outputs: &[Vec<VertexId>],
        level: usize,
        chosen: &mut BTreeMap<UnitId, VertexId>,
        out: &mut BTreeSet<Interpretation>,
    ) {
        if level == order.len() {
            out.insert(chosen.values().fold(Interpretation::new(), |acc, &m| {
                acc.union(&a.vertices[m].int)
            }));
            return;
        }
        let u = order[level];
        for &m in &outputs[level] {
            let input = &a.vertices[a.vertices[m].succ[0]];
            let consistent = input
                .succ
                .iter()
                .zip(&a.preds[u])
                .all(|(s, p)| chosen.get(p) == Some(s));
            if consistent {
                chosen.insert(u, m);
                rec(a, order, outputs, level + 1, chosen, out);
                chosen.remove(&u);
            }
        }
    }
    rec(a, &order, &outputs, 0, &mut chosen, &mut out);
    Ok(out.into_iter().map(|i| i.union(&e.edb)).collect())
}

/// Per-unit storage of the stream: the current input and output model of
/// each unit and how many current inputs use each current output.
#[derive(Clone, Debug, Default)]
pub struct StreamStorage {
    pub cur_i: Vec<Option<Interpretation>>,
    pub cur_o: Vec<Option<Interpretation>>,
    pub refcount_o: Vec<usize>,
}

/// Live model counters, for checking the memory bound of the stream.
#[derive(Clone, Debug, Default)]
pub struct LiveCounters {
    pub live_i: Vec<usize>,
    pub live_o: Vec<usize>,
    pub max_live_i: Vec<usize>,
    pub max_live_o: Vec<usize>,
}

impl LiveCounters {
    pub fn max_per_unit(&self) -> usize {
        self.max_live_i
            .iter()
            .chain(&self.max_live_o)
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// Answer sets on demand. Units are visited in evaluation order, which is a
/// depth-first order over the evaluation graph; each unit keeps one input
/// and one output model, and advancing a unit's output first releases the
/// inputs of all units after it. Exhausted streams stay exhausted.
pub struct AnswerSetStream<'a> {
    e: &'a EvaluationGraph,
    reg: &'a OracleRegistry,
    order: Vec<UnitId>,
    preds: Vec<Vec<UnitId>>,
    programs: Vec<Program>,
    solvers: Vec<Option<AnswerSetIter<'a>>>,
    pub storage: StreamStorage,
    pub counters: LiveCounters,
    pub stats: RunStats,
    started: bool,
    done: bool,
    retained: Option<Retained>,
    max_ground_iter: usize,
}

/// Vertices recorded when the stream keeps its answer set graph.
struct Retained {
    graph: AnswerSetGraph,
    cur_i: Vec<Option<VertexId>>,
    cur_o: Vec<Option<VertexId>>,
    inputs: HashMap<(UnitId, Vec<VertexId>), VertexId>,
    outputs: HashMap<(VertexId, Interpretation), VertexId>,
}

impl<'a> AnswerSetStream<'a> {
    pub fn new(e: &'a EvaluationGraph, reg: &'a OracleRegistry) -> Result<Self, HexError> {
        let fin = final_unit(e)?;
        let order = e.evaluation_order();
        if order.last() != Some(&fin) || order.len() != e.num_units() {
            return Err(HexError::InvalidEvaluationGraph(
                "the final unit must depend on every unit".into(),
            ));
        }
        let n = e.num_units();
        Ok(AnswerSetStream {
            e,
            reg,
            order,
            preds: (0..n).map(|u| e.preds(u)).collect(),
            programs: (0..n).map(|u| e.unit_program(u)).collect(),
            solvers: (0..n).map(|_| None).collect(),
            storage: StreamStorage {
                cur_i: vec![None; n],
                cur_o: vec![None; n],
                refcount_o: vec![0; n],
            },
            counters: LiveCounters {
                live_i: vec![0; n],
                live_o: vec![0; n],
                max_live_i: vec![0; n],
                max_live_o: vec![0; n],
            },
            stats: RunStats {
                units: n,
                evaluations_per_unit: vec![0; n],
                ..Default::default()
            },
            started: false,
            done: false,
            retained: None,
            max_ground_iter: DEFAULT_MAX_ITERATIONS,
        })
    }

    /// Also records every model in an answer set graph, reusing vertices
    /// for models that are computed again.
    pub fn retaining_graph(mut self) -> Self {
        let n = self.e.num_units();
        self.retained = Some(Retained {
            graph: AnswerSetGraph::new(self.e),
            cur_i: vec![None; n],
            cur_o: vec![None; n],
            inputs: HashMap::new(),
            outputs: HashMap::new(),
        });
        self
    }

    pub fn with_max_ground_iter(mut self, n: usize) -> Self {
        self.max_ground_iter = n;
        self
    }

    pub fn retained_graph(&self) -> Option<&AnswerSetGraph> {
        self.retained.as_ref().map(|r| &r.graph)
    }

    fn set_input(&mut self, u: UnitId, int: Interpretation) -> Result<(), HexError> {
        self.counters.live_i[u] += 1;
        self.counters.max_live_i[u] = self.counters.max_live_i[u].max(self.counters.live_i[u]);
        for &p in &self.preds[u] {
            self.storage.refcount_o[p] += 1;
        }
        if let Some(r) = self.retained.as_mut() {
            let succ: Vec<VertexId> = self.preds[u]
                .iter()
                .map(|&p| r.cur_o[p].expect("predecessor output"))
                .collect();
            let id = match r.inputs.get(&(u, succ.clone())) {
                Some(&id) => id,
                None => {
                    let id = r.graph.add_i_interpretation(u, &succ)?;
                    r.inputs.insert((u, succ), id);
                    id
                }
            };
            r.cur_i[u] = Some(id);
        }
        self.storage.cur_i[u] = Some(int);
        Ok(())
    }

    fn clear_output(&mut self, u: UnitId) {
        if self.storage.cur_o[u].take().is_some() {
            self.counters.live_o[u] -= 1;
        }
    }

    fn clear_input(&mut self, u: UnitId) {
        self.clear_output(u);
        self.solvers[u] = None;
        if self.storage.cur_i[u].take().is_some() {
            self.counters.live_i[u] -= 1;
            for &p in &self.preds[u] {
                self.storage.refcount_o[p] -= 1;
            }
        }
    }

    /// Computes u's input from its predecessors' current outputs.
    fn enter(&mut self, u: UnitId) -> Result<(), HexError> {
        let input = self.preds[u].iter().fold(Interpretation::new(), |acc, &p| {
            acc.union(self.storage.cur_o[p].as_ref().expect("predecessor output"))
        });
        self.set_input(u, input)?;
        if Some(u) != self.e.final_unit {
            let facts = self.storage.cur_i[u]
                .as_ref()
                .expect("input just set")
                .union(&self.e.edb);
            let g = ground_fixpoint(
                &self.programs[u].with_facts(&facts),
                self.reg,
                self.max_ground_iter,
            )?
            .program;
            self.stats.evaluations_per_unit[u] += 1;
            self.stats.ground_rules += g.len();
            self.solvers[u] = Some(AnswerSetIter::new(&g, self.reg)?);
        }
        Ok(())
    }

    /// Moves u to its next output model for the current input.
    fn next_output(&mut self, u: UnitId) -> Result<bool, HexError> {
        if self.storage.refcount_o[u] != 0 {
            return Err(HexError::ValidationFailed(format!(
                "output of u{u} advanced while still in use"
            )));
        }
        self.clear_output(u);
        let solver = self.solvers[u].as_mut().expect("solver for current input");
        let before = solver.stats;
        let next = solver.next().transpose()?;
        let after = solver.stats;
        self.stats.solver.candidates += after.candidates - before.candidates;
        self.stats.solver.reduct_checks += after.reduct_checks - before.reduct_checks;
        self.stats.solver.oracle_calls += after.oracle_calls - before.oracle_calls;
        let Some(full) = next else {
            return Ok(false);
        };
        let out = full.difference(
            &self.storage.cur_i[u]
                .as_ref()
                .expect("input")
                .union(&self.e.edb),
        );
        if let Some(r) = self.retained.as_mut() {
            let input = r.cur_i[u].expect("input vertex");
            let id = match r.outputs.get(&(input, out.clone())) {
                Some(&id) => id,
                None => {
                    let id = r.graph.add_o_interpretation(u, input, out.clone())?;
                    r.outputs.insert((input, out.clone()), id);
                    id
                }
            };
            r.cur_o[u] = Some(id);
        }
        self.storage.cur_o[u] = Some(out);
        self.counters.live_o[u] += 1;
        self.counters.max_live_o[u] = self.counters.max_live_o[u].max(self.counters.live_o[u]);
        Ok(true)
    }

    fn advance(&mut self) -> Result<Option<Interpretation>, HexError> {
        let last = self.order.len() - 1;
        let (mut level, mut forward) = if self.started {
            self.clear_input(self.order[last]);
            if last == 0 {
                return Ok(None);
            }
            (last - 1, false)
        } else {
            self.started = true;
            (0, true)
        };
        loop {
            let u = self.order[level];
            if forward {
                self.enter(u)?;
                if level == last {
                    return Ok(self.storage.cur_i[u].as_ref().map(|i| i.union(&self.e.edb)));
                }
            }
            if self.next_output(u)? {
                level += 1;
                forward = true;
            } else {
                self.clear_input(u);
                if level == 0 {
                    return Ok(None);
                }
                level -= 1;
                forward = false;
            }
        }
    }
}

impl Iterator for AnswerSetStream<'_> {
    type Item = Result<Interpretation, HexError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.advance() {
            Ok(Some(i)) => Some(Ok(i)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(err) => {
                self.done = true;
                Some(Err(err))
            }
        }
    }
}

/// Stream of answer sets of an evaluation graph with a final unit.
pub fn answer_sets_on_demand<'a>(
    e: &'a EvaluationGraph,
    reg: &'a OracleRegistry,
) -> Result<AnswerSetStream<'a>, HexError> {
    AnswerSetStream::new(e, reg)
}
