//! Safety checks and fixpoint grounding with value invention.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::deps::{external_depends_on, tarjan_scc};
use crate::external::{InputType, OracleRegistry, Tuple};
use crate::syntax::{
    join, unifies, Atom, BuiltinOp, ExternalAtom, Interpretation, Literal, Program, Rule,
    Substitution, Sym, Term,
};
use crate::HexError;

pub const DEFAULT_MAX_ITERATIONS: usize = 64;

/// Nonmonotonic external atoms are grounded by enumerating subsets of their
/// undetermined input atoms; more than this many is refused.
pub const NONMONOTONIC_INPUT_LIMIT: usize = 12;

/// Variables of r that are bound by its positive body: occurrences in
/// ordinary atoms, outputs of external atoms with safe inputs, and `=`
/// with a safe side.
pub fn safe_variables(r: &Rule) -> BTreeSet<Sym> {
    let mut safe: BTreeSet<Sym> = BTreeSet::new();
    for l in &r.pos {
        if let Literal::Ordinary(a) = l {
            safe.extend(a.vars().cloned());
        }
    }
    loop {
        let before = safe.len();
        for l in &r.pos {
            match l {
                Literal::External(e) => {
                    if e.inputs.iter().all(|t| term_safe(t, &safe)) {
                        safe.extend(e.outputs.iter().filter_map(var_of));
                    }
                }
                Literal::Builtin(b) if b.op == BuiltinOp::Eq => {
                    if term_safe(&b.left, &safe) {
                        safe.extend(var_of(&b.right));
                    }
                    if term_safe(&b.right, &safe) {
                        safe.extend(var_of(&b.left));
                    }
                }
                _ => {}
            }
        }
        if safe.len() == before {
            return safe;
        }
    }
}

fn var_of(t: &Term) -> Option<Sym> {
    match t {
        Term::Var(v) => Some(v.clone()),
        Term::Const(_) => None,
    }
}

fn term_safe(t: &Term, safe: &BTreeSet<Sym>) -> bool {
    match t {
        Term::Const(_) => true,
        Term::Var(v) => safe.contains(v),
    }
}

/// Diagnostic from the safety check that does not stop evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyWarning {
    pub rule: usize,
    pub message: String,
}

/// Errors on unsafe rules and unknown or mis-typed external atoms. Warns
/// about value invention inside a recursive component when the invented
/// value reaches the head without being guarded by a positive ordinary atom
/// defined outside that component.
pub fn check_program_safety(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<Vec<SafetyWarning>, HexError> {
    for r in &p.rules {
        for (e, _) in r.externals() {
            reg.check_atom(e)?;
        }
        let safe = safe_variables(r);
        let unsafe_vars: Vec<Sym> = r.vars().into_iter().filter(|v| !safe.contains(v)).collect();
        if !unsafe_vars.is_empty() {
            return Err(HexError::UnsafeRule {
                rule: r.to_string(),
                vars: join(&unsafe_vars, ", "),
            });
        }
    }
    // Rule graph including self-dependencies.
    let n = p.len();
    let mut succ = vec![Vec::new(); n];
    for (ri, r) in p.rules.iter().enumerate() {
        for (si, s) in p.rules.iter().enumerate() {
            let mut dep = false;
            for h in &s.head {
                for l in r.body() {
                    dep |= match l {
                        Literal::Ordinary(a) => unifies(a, h),
                        Literal::External(e) => external_depends_on(e, h, reg)?.is_some(),
                        Literal::Builtin(_) => false,
                    };
                }
            }
            if dep {
                succ[ri].push(si);
            }
        }
    }
    let mut warnings = Vec::new();
    for comp in tarjan_scc(n, &succ) {
        let cyclic = comp.len() > 1 || succ[comp[0]].contains(&comp[0]);
        if !cyclic {
            continue;
        }
        let comp_heads: Vec<&Atom> = comp.iter().flat_map(|&k| &p.rules[k].head).collect();
        for &k in &comp {
            let r = &p.rules[k];
            let head_vars: BTreeSet<Sym> = r.head.iter().flat_map(|a| a.vars().cloned()).collect();
            let guarded: BTreeSet<Sym> = r
                .pos
                .iter()
                .filter_map(Literal::as_ordinary)
                .filter(|a| !comp_heads.iter().any(|h| unifies(a, h)))
                .flat_map(|a| a.vars().cloned())
                .collect();
            for (e, positive) in r.externals() {
                if !positive {
                    continue;
                }
                for v in e.outputs.iter().filter_map(var_of) {
                    if head_vars.contains(&v) && !guarded.contains(&v) {
                        warnings.push(SafetyWarning {
                            rule: k,
                            message: format!(
                                "rule `{r}`: value invention through {e} in a recursive component; \
                                 variable {v} is not bound by an atom outside the component, \
                                 so grounding may not terminate"
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(warnings)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundingReport {
    pub program: Program,
    /// Iterations that added at least one ground rule.
    pub iterations: usize,
    /// Constants in the ground program that do not occur in the input.
    pub invented: BTreeSet<Sym>,
}

struct Grounder<'a> {
    reg: &'a OracleRegistry,
    derivable: Interpretation,
    fixed: Interpretation,
    ext_cache: BTreeMap<(Sym, Vec<Sym>), BTreeSet<Tuple>>,
    holds_cache: BTreeMap<ExternalAtom, bool>,
}

impl<'a> Grounder<'a> {
    /// Interpretations between `fixed` and `derivable` that matter for &g's
    /// inputs: only the maximal one for monotonic predicates.
    fn candidate_interpretations(
        &self,
        name: &Sym,
        inputs: &[Sym],
    ) -> Result<Vec<Interpretation>, HexError> {
        let def = self.reg.get(name)?;
        if def.monotonic {
            return Ok(vec![self.derivable.clone()]);
        }
        let preds: BTreeSet<Sym> = inputs
            .iter()
            .zip(&def.signature.inputs)
            .filter(|(_, ty)| matches!(ty, InputType::Pred(_)))
            .map(|(c, _)| c.clone())
            .collect();
        let open: Vec<Atom> = self
            .derivable
            .restrict_to(&preds)
            .difference(&self.fixed)
            .0
            .into_iter()
            .collect();
        if open.len() > NONMONOTONIC_INPUT_LIMIT {
            return Err(HexError::TooManyAtoms {
                count: open.len(),
                limit: NONMONOTONIC_INPUT_LIMIT,
            });
        }
        let base = self.fixed.restrict_to(&preds);
        Ok((0u32..1 << open.len())
            .map(|mask| {
                let mut i = base.clone();
                for (k, a) in open.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        i.insert(a.clone());
                    }
                }
                i
            })
            .collect())
    }

    fn possible_outputs(
        &mut self,
        name: &Sym,
        inputs: &[Sym],
    ) -> Result<BTreeSet<Tuple>, HexError> {
        let key = (name.clone(), inputs.to_vec());
        if let Some(v) = self.ext_cache.get(&key) {
            return Ok(v.clone());
        }
        let terms: Vec<Term> = inputs.iter().map(|c| Term::Const(c.clone())).collect();
        let mut out = BTreeSet::new();
        for i in self.candidate_interpretations(name, inputs)? {
            out.extend(self.reg.extensional_eval(name, &terms, &i)?);
        }
        self.ext_cache.insert(key, out.clone());
        Ok(out)
    }

    fn possibly_true(&mut self, e: &ExternalAtom) -> Result<bool, HexError> {
        if let Some(&v) = self.holds_cache.get(e) {
            return Ok(v);
        }
        let inputs: Vec<Sym> = e
            .inputs
            .iter()
            .map(|t| t.as_const().cloned().expect("ground"))
            .collect();
        let mut res = false;
        for i in self.candidate_interpretations(&e.name, &inputs)? {
            if self.reg.eval_oracle(e, &i)? {
                res = true;
                break;
            }
        }
        self.holds_cache.insert(e.clone(), res);
        Ok(res)
    }

    /// Substitutions under which every positive body literal of r can be
    /// true in some interpretation between `fixed` and `derivable`.
    fn instances(&mut self, r: &Rule) -> Result<Vec<Substitution>, HexError> {
        let mut out = Vec::new();
        let remaining: Vec<&Literal> = r.pos.iter().collect();
        self.extend(r, &remaining, Substitution::new(), &mut out)?;
        Ok(out)
    }

    fn extend(
        &mut self,
        r: &Rule,
        remaining: &[&Literal],
        theta: Substitution,
        out: &mut Vec<Substitution>,
    ) -> Result<(), HexError> {
        if remaining.is_empty() {
            if let Some(v) = r.vars().into_iter().find(|v| !theta.contains_key(v)) {
                return Err(HexError::UnsafeRule {
                    rule: r.to_string(),
                    vars: v.to_string(),
                });
            }
            out.push(theta);
            return Ok(());
        }
        let bound = |t: &Term| !t.apply(&theta).is_var();
        // Ready builtins first, then ordinary atoms, then externals whose
        // inputs are bound.
        let pick = remaining
            .iter()
            .position(|l| match l {
                Literal::Builtin(b) => {
                    (bound(&b.left) && bound(&b.right))
                        || (b.op == BuiltinOp::Eq && (bound(&b.left) || bound(&b.right)))
                }
                _ => false,
            })
            .or_else(|| {
                remaining
                    .iter()
                    .position(|l| matches!(l, Literal::Ordinary(_)))
            })
            .or_else(|| {
                remaining
                    .iter()
                    .position(|l| matches!(l, Literal::External(e) if e.inputs.iter().all(bound)))
            });
        let Some(k) = pick else {
            return Err(HexError::UnsafeRule {
                rule: r.to_string(),
                vars: "(body cannot be ordered so that all inputs are bound)".into(),
            });
        };
        let lit = remaining[k].apply(&theta);
        let rest: Vec<&Literal> = remaining
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, l)| *l)
            .collect();
        match lit {
            Literal::Builtin(b) => match b.eval() {
                Some(true) => self.extend(r, &rest, theta, out)?,
                Some(false) => {}
                None => {
                    let (var, val) = match (&b.left, &b.right) {
                        (Term::Var(v), Term::Const(c)) | (Term::Const(c), Term::Var(v)) => {
                            (v.clone(), c.clone())
                        }
                        _ => unreachable!("picked builtins have a bound side"),
                    };
                    let mut t = theta;
                    t.insert(var, val);
                    self.extend(r, &rest, t, out)?;
                }
            },
            Literal::Ordinary(a) => {
                let start = Atom {
                    predicate: a.predicate.clone(),
                    args: Vec::new(),
                };
                let matches: Vec<Substitution> = self
                    .derivable
                    .0
                    .range(start..)
                    .take_while(|g| g.predicate == a.predicate)
                    .filter_map(|g| match_args(&a.args, &g.args, &theta))
                    .collect();
                for t in matches {
                    self.extend(r, &rest, t, out)?;
                }
            }
            Literal::External(e) => {
                if e.outputs.iter().all(|t| !t.is_var()) {
                    if self.possibly_true(&e)? {
                        self.extend(r, &rest, theta, out)?;
                    }
                } else {
                    let inputs: Vec<Sym> = e
                        .inputs
                        .iter()
                        .map(|t| t.as_const().cloned().expect("bound"))
                        .collect();
                    let outs = self.possible_outputs(&e.name, &inputs)?;
                    for tuple in outs {
                        let consts: Vec<Term> = tuple.into_iter().map(Term::Const).collect();
                        if let Some(t) = match_args(&e.outputs, &consts, &theta) {
                            self.extend(r, &rest, t, out)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Extends θ so that `pattern`θ equals the ground `target`.
fn match_args(pattern: &[Term], target: &[Term], theta: &Substitution) -> Option<Substitution> {
    if pattern.len() != target.len() {
        return None;
    }
    let mut t = theta.clone();
    for (p, g) in pattern.iter().zip(target) {
        let g = g.as_const()?;
        match p {
            Term::Const(c) => {
                if c != g {
                    return None;
                }
            }
            Term::Var(v) => match t.get(v) {
                Some(c) if c != g => return None,
                Some(_) => {}
                None => {
                    t.insert(v.clone(), g.clone());
                }
            },
        }
    }
    Some(t)
}

fn strip_builtins(r: Rule) -> Rule {
    Rule {
        head: r.head,
        pos: r
            .pos
            .into_iter()
            .filter(|l| !matches!(l, Literal::Builtin(_)))
            .collect(),
        neg: r.neg,
    }
}

/// Iterates the grounding operator from the program's ground facts until no
/// new ground rule appears. A rule instance is added once its positive body
/// can be satisfied by some interpretation over the atoms derivable so far.
pub fn ground_fixpoint(
    p: &Program,
    reg: &OracleRegistry,
    max_iter: usize,
) -> Result<GroundingReport, HexError> {
    check_program_safety(p, reg)?;
    let mut rules: Vec<Rule> = Vec::new();
    let mut seen: HashSet<Rule> = HashSet::new();
    let mut g = Grounder {
        reg,
        derivable: Interpretation::new(),
        fixed: Interpretation::new(),
        ext_cache: BTreeMap::new(),
        holds_cache: BTreeMap::new(),
    };
    let add = |r: Rule, rules: &mut Vec<Rule>, seen: &mut HashSet<Rule>, g: &mut Grounder| {
        if seen.insert(r.clone()) {
            for a in &r.head {
                g.derivable.insert(a.clone());
            }
            if r.is_fact() && r.head.len() == 1 {
                g.fixed.insert(r.head[0].clone());
            }
            rules.push(r);
        }
    };
    for r in &p.rules {
        if r.pos.is_empty() && r.neg.is_empty() && r.is_ground() {
            add(r.clone(), &mut rules, &mut seen, &mut g);
        }
    }
    let mut iterations = 0;
    loop {
        g.ext_cache.clear();
        g.holds_cache.clear();
        let mut fresh = Vec::new();
        for r in &p.rules {
            if r.pos.is_empty() && r.neg.is_empty() && r.is_ground() {
                continue;
            }
            for theta in g.instances(r)? {
                let gr = strip_builtins(r.apply(&theta));
                if !seen.contains(&gr) {
                    fresh.push(gr);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        iterations += 1;
        if iterations > max_iter {
            return Err(HexError::GroundingDiverged {
                iterations: max_iter,
            });
        }
        for r in fresh {
            add(r, &mut rules, &mut seen, &mut g);
        }
    }
    let program = Program::new(rules);
    let original = p.constants();
    let invented = program
        .term_constants()
        .into_iter()
        .filter(|c| !original.contains(c))
        .collect();
    Ok(GroundingReport {
        program,
        iterations,
        invented,
    })
}

/// Ground program with the same answer sets as P.
pub fn ground_hex(p: &Program, reg: &OracleRegistry) -> Result<Program, HexError> {
    Ok(ground_fixpoint(p, reg, DEFAULT_MAX_ITERATIONS)?.program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn concat_chain_grounds_in_two_iterations() {
        let p =
            parse_program("s(a).\ndom(ax).\ndom(axx).\ns(Y) :- s(X), &concat[X,x](Y), dom(Y).\n")
                .unwrap();
        let rep = ground_fixpoint(&p, &OracleRegistry::with_builtins(), 64).unwrap();
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.program.len(), 5);
        assert!(rep.invented.is_empty());
    }

    #[test]
    fn unbounded_invention_diverges() {
        let p = parse_program("s(a).\ns(Y) :- s(X), &concat[X,x](Y).\n").unwrap();
        let reg = OracleRegistry::with_builtins();
        let w = check_program_safety(&p, &reg).unwrap();
        assert_eq!(w.len(), 1);
        assert!(matches!(
            ground_fixpoint(&p, &reg, 10),
            Err(HexError::GroundingDiverged { iterations: 10 })
        ));
    }

    #[test]
    fn unsafe_rule_rejected() {
        let p = parse_program("p(X) :- not q(X).\n").unwrap();
        assert!(matches!(
            check_program_safety(&p, &OracleRegistry::new()),
            Err(HexError::UnsafeRule { .. })
        ));
        let p = parse_program("p(X) :- q(Y), X = Y.\nq(a).\n").unwrap();
        assert!(check_program_safety(&p, &OracleRegistry::new()).is_ok());
    }

    #[test]
    fn underivable_bodies_are_dropped() {
        let p = parse_program("a :- b.\nc.\nd :- c, not a.\n").unwrap();
        let rep = ground_fixpoint(&p, &OracleRegistry::new(), 64).unwrap();
        assert_eq!(rep.program.to_string(), "c.\nd :- c, not a.\n");
    }

    #[test]
    fn nonmonotonic_inputs_enumerate_subsets() {
        let p =
            parse_program("p(a) | p(b).\nq(X) :- &not[p](X), dom(X).\ndom(a).\ndom(b).\ndom(c).\n")
                .unwrap();
        // &not cannot enumerate outputs, but its outputs are bound by dom first.
        let rep = ground_fixpoint(&p, &OracleRegistry::with_builtins(), 64).unwrap();
        let heads: BTreeSet<String> = rep
            .program
            .rules
            .iter()
            .filter(|r| !r.is_fact())
            .map(|r| r.head[0].to_string())
            .collect();
        assert_eq!(
            heads,
            ["q(a)", "q(b)", "q(c)"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
    }
}
