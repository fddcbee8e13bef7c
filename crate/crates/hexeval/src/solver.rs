//! Answer sets of ground HEX programs.
//!
//! `evaluate_ground_hex` guesses truth values for ordinary atoms and for
//! replacement atoms of external atoms, prunes with unit propagation over
//! the rule clauses, completion-style support clauses and body definitions,
//! checks each surviving candidate against the oracles and finally runs an
//! FLP minimality search. `enumerate_answer_sets_bruteforce` is the
//! reference enumeration over all subsets of the head atoms.

use std::collections::{BTreeSet, HashMap};

use crate::external::{InputType, OracleRegistry};
use crate::grounding::{ground_fixpoint, ground_hex, DEFAULT_MAX_ITERATIONS};
use crate::syntax::{
    flp_reduct, satisfies, Atom, ExternalAtom, Interpretation, Literal, Program, Rule,
};
use crate::HexError;

pub const BRUTEFORCE_ATOM_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Total assignments reaching the external check.
    pub candidates: u64,
    /// FLP minimality searches started.
    pub reduct_checks: u64,
    pub oracle_calls: u64,
}

impl std::ops::AddAssign for SolveStats {
    fn add_assign(&mut self, o: Self) {
        self.candidates += o.candidates;
        self.reduct_checks += o.reduct_checks;
        self.oracle_calls += o.oracle_calls;
    }
}

/// Literal over propositional variables: `var << 1 | negated`.
type Lit = u32;

fn pos(v: usize) -> Lit {
    (v as Lit) << 1
}

fn neg(v: usize) -> Lit {
    pos(v) | 1
}

fn var(l: Lit) -> usize {
    (l >> 1) as usize
}

const UNASSIGNED: i8 = -1;

/// Clause set with a resumable depth-first model enumerator. Decisions try
/// false before true, in variable order.
struct Search {
    clauses: Vec<Vec<Lit>>,
    occurs: Vec<Vec<usize>>,
    value: Vec<i8>,
    trail: Vec<usize>,
    /// (trail length before the decision, variable, already flipped)
    decisions: Vec<(usize, usize, bool)>,
    started: bool,
    exhausted: bool,
}

impl Search {
    fn new(nvars: usize, clauses: Vec<Vec<Lit>>) -> Self {
        let mut occurs = vec![Vec::new(); nvars];
        for (k, c) in clauses.iter().enumerate() {
            for &l in c {
                occurs[var(l)].push(k);
            }
        }
        Search {
            clauses,
            occurs,
            value: vec![UNASSIGNED; nvars],
            trail: Vec::new(),
            decisions: Vec::new(),
            started: false,
            exhausted: false,
        }
    }

    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.value[var(l)];
        if v == UNASSIGNED {
            UNASSIGNED
        } else {
            v ^ (l & 1) as i8
        }
    }

    fn assign(&mut self, l: Lit) {
        self.value[var(l)] = 1 ^ (l & 1) as i8;
        self.trail.push(var(l));
    }

    /// Unit propagation from trail position `from`; false on conflict.
    fn propagate(&mut self, mut from: usize) -> bool {
        while from < self.trail.len() {
            let v = self.trail[from];
            from += 1;
            for ci in 0..self.occurs[v].len() {
                let c = self.occurs[v][ci];
                let mut unassigned = None;
                let mut count = 0;
                let mut sat = false;
                for &l in &self.clauses[c] {
                    match self.lit_value(l) {
                        1 => {
                            sat = true;
                            break;
                        }
                        UNASSIGNED => {
                            count += 1;
                            unassigned = Some(l);
                        }
                        _ => {}
                    }
                }
                if sat {
                    continue;
                }
                match (count, unassigned) {
                    (0, _) => return false,
                    (1, Some(l)) => self.assign(l),
                    _ => {}
                }
            }
        }
        true
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let v = self.trail.pop().expect("nonempty trail");
            self.value[v] = UNASSIGNED;
        }
    }

    /// Flips the deepest unflipped decision; false when none is left.
    fn backtrack(&mut self) -> bool {
        while let Some((len, v, flipped)) = self.decisions.pop() {
            self.undo_to(len);
            if !flipped {
                self.decisions.push((len, v, true));
                self.assign(pos(v));
                if self.propagate(len) {
                    return true;
                }
            }
        }
        false
    }

    fn initial(&mut self) -> bool {
        for c in 0..self.clauses.len() {
            match self.clauses[c].len() {
                0 => return false,
                1 => {
                    let l = self.clauses[c][0];
                    match self.lit_value(l) {
                        0 => return false,
                        UNASSIGNED => self.assign(l),
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        self.propagate(0)
    }

    /// Next total assignment satisfying every clause.
    fn next_model(&mut self) -> Option<&[i8]> {
        if self.exhausted {
            return None;
        }
        let mut ok = if self.started {
            self.backtrack()
        } else {
            self.started = true;
            self.initial()
        };
        loop {
            if !ok {
                self.exhausted = true;
                return None;
            }
            let Some(v) = self.value.iter().position(|&x| x == UNASSIGNED) else {
                return Some(&self.value);
            };
            let len = self.trail.len();
            self.decisions.push((len, v, false));
            self.assign(neg(v));
            ok = self.propagate(len) || self.backtrack();
        }
    }
}

/// Ground program over numbered atoms and external atoms.
struct Indexed {
    atoms: Vec<Atom>,
    atom_id: HashMap<Atom, usize>,
    exts: Vec<ExternalAtom>,
    ext_id: HashMap<ExternalAtom, usize>,
    rules: Vec<Rule>,
}

#[derive(Clone, Copy)]
enum BLit {
    Atom(usize),
    Ext(usize),
    True,
    False,
}

impl Indexed {
    fn new(p: &Program) -> Self {
        let mut ix = Indexed {
            atoms: Vec::new(),
            atom_id: HashMap::new(),
            exts: Vec::new(),
            ext_id: HashMap::new(),
            rules: p.rules.clone(),
        };
        let heads: BTreeSet<&Atom> = p.rules.iter().flat_map(|r| &r.head).collect();
        for a in heads {
            ix.atom_id.insert(a.clone(), ix.atoms.len());
            ix.atoms.push(a.clone());
        }
        for r in &p.rules {
            for (e, _) in r.externals() {
                if !ix.ext_id.contains_key(e) {
                    ix.ext_id.insert(e.clone(), ix.exts.len());
                    ix.exts.push(e.clone());
                }
            }
        }
        ix
    }

    fn lit(&self, l: &Literal) -> BLit {
        match l {
            Literal::Ordinary(a) => self.atom_id.get(a).map_or(BLit::False, |&k| BLit::Atom(k)),
            Literal::External(e) => BLit::Ext(self.ext_id[e]),
            Literal::Builtin(b) => {
                if b.eval() == Some(true) {
                    BLit::True
                } else {
                    BLit::False
                }
            }
        }
    }
}

/// Lazily enumerates the answer sets of a ground program.
pub struct AnswerSetIter<'r> {
    reg: &'r OracleRegistry,
    ix: Indexed,
    search: Search,
    /// External atoms fixed before the search, by index.
    fixed_ext: Vec<Option<bool>>,
    pub stats: SolveStats,
    failed: bool,
}

impl<'r> AnswerSetIter<'r> {
    pub fn new(p: &Program, reg: &'r OracleRegistry) -> Result<Self, HexError> {
        if !p.is_ground() {
            return Err(HexError::UnboundVariable(
                "solver input must be ground".into(),
            ));
        }
        let ix = Indexed::new(p);
        let na = ix.atoms.len();
        let ne = ix.exts.len();
        let ext_var = |k: usize| na + k;
        let body_var = |k: usize| na + ne + k;
        let nvars = na + ne + ix.rules.len();
        let mut stats = SolveStats::default();

        // External atoms whose inputs are all determined by facts are
        // evaluated once, up front.
        let fixed_true: Interpretation = ix
            .rules
            .iter()
            .filter(|r| r.is_fact() && r.head.len() == 1)
            .map(|r| r.head[0].clone())
            .collect();
        let undetermined: BTreeSet<&crate::syntax::Sym> = ix
            .atoms
            .iter()
            .filter(|a| !fixed_true.contains(a))
            .map(|a| &a.predicate)
            .collect();
        let mut fixed_ext = vec![None; ne];
        for (k, e) in ix.exts.iter().enumerate() {
            let def = reg.check_atom(e)?;
            let determined = e
                .inputs
                .iter()
                .zip(&def.signature.inputs)
                .all(|(t, ty)| match ty {
                    InputType::Const => true,
                    InputType::Pred(_) => t.as_const().is_some_and(|c| !undetermined.contains(c)),
                });
            if determined {
                stats.oracle_calls += 1;
                fixed_ext[k] = Some(reg.eval_oracle(e, &fixed_true)?);
            }
        }

        let mut clauses: Vec<Vec<Lit>> = Vec::new();
        let mut support: Vec<Vec<Lit>> = (0..na).map(|a| vec![neg(a)]).collect();
        for (k, r) in ix.rules.iter().enumerate() {
            let b = body_var(k);
            let mut body: Vec<Lit> = Vec::new();
            let mut impossible = false;
            for l in &r.pos {
                match ix.lit(l) {
                    BLit::True => {}
                    BLit::Atom(a) => body.push(pos(a)),
                    BLit::Ext(e) => body.push(pos(ext_var(e))),
                    BLit::False => impossible = true,
                }
            }
            for l in &r.neg {
                match ix.lit(l) {
                    BLit::Atom(a) => body.push(neg(a)),
                    BLit::Ext(e) => body.push(neg(ext_var(e))),
                    BLit::True => impossible = true,
                    BLit::False => {}
                }
            }
            if impossible {
                clauses.push(vec![neg(b)]);
                continue;
            }
            for &l in &body {
                clauses.push(vec![neg(b), l]);
            }
            let mut def_clause = vec![pos(b)];
            def_clause.extend(body.iter().map(|&l| l ^ 1));
            clauses.push(def_clause);
            let mut head_clause = vec![neg(b)];
            for h in &r.head {
                let a = ix.atom_id[h];
                head_clause.push(pos(a));
                support[a].push(pos(b));
            }
            clauses.push(head_clause);
        }
        clauses.extend(support);
        for (k, v) in fixed_ext.iter().enumerate() {
            if let Some(v) = v {
                clauses.push(vec![if *v { pos(ext_var(k)) } else { neg(ext_var(k)) }]);
            }
        }
        Ok(AnswerSetIter {
            reg,
            search: Search::new(nvars, clauses),
            ix,
            fixed_ext,
            stats,
            failed: false,
        })
    }

    fn step(&mut self) -> Result<Option<Interpretation>, HexError> {
        let na = self.ix.atoms.len();
        let ne = self.ix.exts.len();
        loop {
            let Some(model) = self.search.next_model() else {
                return Ok(None);
            };
            let model = model.to_vec();
            self.stats.candidates += 1;
            let i: Interpretation = (0..na)
                .filter(|&a| model[a] == 1)
                .map(|a| self.ix.atoms[a].clone())
                .collect();
            let mut consistent = true;
            for k in 0..ne {
                if self.fixed_ext[k].is_some() {
                    continue;
                }
                self.stats.oracle_calls += 1;
                if self.reg.eval_oracle(&self.ix.exts[k], &i)? != (model[na + k] == 1) {
                    consistent = false;
                    break;
                }
            }
            if !consistent {
                continue;
            }
            let reduct: Vec<&Rule> = self
                .ix
                .rules
                .iter()
                .enumerate()
                .filter(|(k, _)| model[na + ne + k] == 1)
                .map(|(_, r)| r)
                .collect();
            self.stats.reduct_checks += 1;
            if !has_smaller_model(&reduct, &i, self.reg, &mut self.stats)? {
                return Ok(Some(i));
            }
        }
    }
}

impl Iterator for AnswerSetIter<'_> {
    type Item = Result<Interpretation, HexError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.step() {
            Ok(Some(i)) => Some(Ok(i)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Is there J ⊊ I satisfying every rule of `reduct` (external atoms
/// evaluated under J)?
fn has_smaller_model(
    reduct: &[&Rule],
    i: &Interpretation,
    reg: &OracleRegistry,
    stats: &mut SolveStats,
) -> Result<bool, HexError> {
    if i.is_empty() {
        return Ok(false);
    }
    let atoms: Vec<&Atom> = i.iter().collect();
    let atom_id: HashMap<&Atom, usize> = atoms.iter().enumerate().map(|(k, a)| (*a, k)).collect();
    let mut exts: Vec<&ExternalAtom> = Vec::new();
    let mut ext_id: HashMap<&ExternalAtom, usize> = HashMap::new();
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    for r in reduct {
        let mut c: Vec<Lit> = r
            .head
            .iter()
            .filter_map(|h| atom_id.get(h).map(|&k| pos(k)))
            .collect();
        let mut trivially_sat = false;
        for (l, positive) in r
            .pos
            .iter()
            .map(|l| (l, true))
            .chain(r.neg.iter().map(|l| (l, false)))
        {
            match l {
                Literal::Ordinary(a) => match (atom_id.get(a), positive) {
                    (Some(&k), true) => c.push(neg(k)),
                    // Positive atom outside I: false in J, body fails.
                    (None, true) => trivially_sat = true,
                    // `not a` with a ∈ I can only become true in J.
                    (Some(&k), false) => c.push(pos(k)),
                    (None, false) => {}
                },
                Literal::External(e) => {
                    let k = *ext_id.entry(e).or_insert_with(|| {
                        exts.push(e);
                        exts.len() - 1
                    });
                    let v = atoms.len() + k;
                    c.push(if positive { neg(v) } else { pos(v) });
                }
                Literal::Builtin(b) => {
                    if b.eval() == Some(false) {
                        trivially_sat = true;
                    }
                }
            }
        }
        if !trivially_sat {
            clauses.push(c);
        }
    }
    clauses.push((0..atoms.len()).map(neg).collect());
    let mut search = Search::new(atoms.len() + exts.len(), clauses);
    while let Some(model) = search.next_model() {
        if exts.is_empty() {
            return Ok(true);
        }
        let j: Interpretation = (0..atoms.len())
            .filter(|&k| model[k] == 1)
            .map(|k| atoms[k].clone())
            .collect();
        let mut ok = true;
        for (k, e) in exts.iter().enumerate() {
            stats.oracle_calls += 1;
            if reg.eval_oracle(e, &j)? != (model[atoms.len() + k] == 1) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(true);
        }
    }
    Ok(false)
}

/// All answer sets of a ground program, in canonical order.
pub fn evaluate_ground_hex(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<(BTreeSet<Interpretation>, SolveStats), HexError> {
    let mut it = AnswerSetIter::new(p, reg)?;
    let mut out = BTreeSet::new();
    for i in it.by_ref() {
        out.insert(i?);
    }
    Ok((out, it.stats))
}

/// Outcome of solving one unit on one input.
#[derive(Clone, Debug, Default)]
pub struct UnitEvaluation {
    pub outputs: Vec<Interpretation>,
    pub stats: SolveStats,
    pub ground_rules: usize,
}

/// {I' ∖ I | I' ∈ AS(ground(u ∪ facts(I)))}, sorted, with statistics.
pub fn evaluate_unit(
    u: &Program,
    input: &Interpretation,
    reg: &OracleRegistry,
) -> Result<UnitEvaluation, HexError> {
    evaluate_unit_bounded(u, input, reg, DEFAULT_MAX_ITERATIONS)
}

/// `evaluate_unit` with at most `max_iter` grounding iterations.
pub fn evaluate_unit_bounded(
    u: &Program,
    input: &Interpretation,
    reg: &OracleRegistry,
    max_iter: usize,
) -> Result<UnitEvaluation, HexError> {
    let g = ground_fixpoint(&u.with_facts(input), reg, max_iter)?.program;
    let (sets, stats) = evaluate_ground_hex(&g, reg)?;
    let out: BTreeSet<Interpretation> = sets.iter().map(|s| s.difference(input)).collect();
    Ok(UnitEvaluation {
        outputs: out.into_iter().collect(),
        stats,
        ground_rules: g.len(),
    })
}

/// {I' ∖ I | I' ∈ AS(ground(u ∪ facts(I)))}, sorted.
pub fn evaluate_lde_safe(
    u: &Program,
    input: &Interpretation,
    reg: &OracleRegistry,
) -> Result<Vec<Interpretation>, HexError> {
    Ok(evaluate_unit(u, input, reg)?.outputs)
}

/// I is an answer set of the ground program P: a model of P and a minimal
/// model of its FLP reduct.
pub fn check_answer_set(
    p: &Program,
    i: &Interpretation,
    reg: &OracleRegistry,
) -> Result<bool, HexError> {
    if !satisfies(i, p, reg)? {
        return Ok(false);
    }
    let reduct = flp_reduct(p, i, reg)?;
    let rules: Vec<&Rule> = reduct.rules.iter().collect();
    Ok(!has_smaller_model(
        &rules,
        i,
        reg,
        &mut SolveStats::default(),
    )?)
}

/// Reference enumeration: every subset of the head atoms is tested for
/// being a model and every proper subset of a model for being a model of
/// the reduct.
pub fn enumerate_answer_sets_bruteforce(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<BTreeSet<Interpretation>, HexError> {
    let heads: Vec<Atom> = p
        .rules
        .iter()
        .flat_map(|r| r.head.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if heads.len() > BRUTEFORCE_ATOM_LIMIT {
        return Err(HexError::TooManyAtoms {
            count: heads.len(),
            limit: BRUTEFORCE_ATOM_LIMIT,
        });
    }
    let subset = |mask: u32| -> Interpretation {
        heads
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, a)| a.clone())
            .collect()
    };
    let mut out = BTreeSet::new();
    for mask in 0u32..(1 << heads.len()) {
        let i = subset(mask);
        if !satisfies(&i, p, reg)? {
            continue;
        }
        let reduct = flp_reduct(p, &i, reg)?;
        let mut minimal = true;
        // Proper submasks of `mask`.
        let mut sub = mask;
        while sub != 0 {
            sub = (sub - 1) & mask;
            if satisfies(&subset(sub), &reduct, reg)? {
                minimal = false;
                break;
            }
        }
        if minimal {
            out.insert(i);
        }
    }
    Ok(out)
}

/// Ground and solve a whole program in one step.
pub fn solve_monolithic(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<BTreeSet<Interpretation>, HexError> {
    Ok(evaluate_ground_hex(&ground_hex(p, reg)?, reg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn sets(p: &str, reg: &OracleRegistry) -> Vec<String> {
        let g = ground_hex(&parse_program(p).unwrap(), reg).unwrap();
        let (s, _) = evaluate_ground_hex(&g, reg).unwrap();
        let b = enumerate_answer_sets_bruteforce(&g, reg).unwrap();
        assert_eq!(s, b, "solver and brute force disagree on {p}");
        s.iter().map(|i| i.to_string()).collect()
    }

    #[test]
    fn normal_and_disjunctive_programs() {
        let reg = OracleRegistry::new();
        assert_eq!(sets("a :- not b.\nb :- not a.\n", &reg), ["{a}", "{b}"]);
        assert_eq!(sets("a | b.\na :- b.\n", &reg), ["{a}"]);
        assert_eq!(sets("a :- a.\n", &reg), ["{}"]);
        assert_eq!(sets("a :- not a.\n", &reg), Vec::<String>::new());
        assert_eq!(sets("a | b.\nb | c.\n:- b.\n", &reg), ["{a, c}"]);
    }

    #[test]
    fn external_self_support_is_not_minimal() {
        // p(a) cannot support itself through a monotonic external check.
        let mut reg = OracleRegistry::with_builtins();
        reg.register(
            crate::external::parse_table_oracle(
                "&id in=(1) out=1 monotonic=yes\nemit (a) if has 1 (a)\n",
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(sets("dom(a).\np(a) :- &id[p](a).\n", &reg), ["{dom(a)}"]);
    }

    #[test]
    fn flp_rejects_unfounded_nonmonotonic_loop() {
        let reg = OracleRegistry::with_builtins();
        assert!(sets("p(a) :- not &not[p](a).\nf :- not p(a), not f.\n", &reg).is_empty());
    }

    #[test]
    fn streaming_iterator_matches_batch() {
        let reg = OracleRegistry::new();
        let p = ground_hex(&parse_program("a | b | c.\nd | e :- a.\n").unwrap(), &reg).unwrap();
        let streamed: BTreeSet<Interpretation> = AnswerSetIter::new(&p, &reg)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(streamed.len(), 4);
        assert_eq!(streamed, evaluate_ground_hex(&p, &reg).unwrap().0);
    }

    #[test]
    fn lde_safe_strips_input() {
        let reg = OracleRegistry::new();
        let u = parse_program("b :- a.\n").unwrap();
        let input: Interpretation = [Atom::ground("a", &[])].into_iter().collect();
        let out = evaluate_lde_safe(&u, &input, &reg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to_string(), "{b}");
    }
}
