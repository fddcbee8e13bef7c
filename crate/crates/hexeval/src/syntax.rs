//! Terms, atoms, rules, programs and interpretations, plus the basic
//! semantic operations on them (satisfaction, reduct, grounding by
//! substitution).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::external::OracleRegistry;
use crate::HexError;

/// Interned-by-value symbol. Cheap to clone, ordered by its text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(s: &str) -> Self {
        Sym(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Const(Sym),
    Var(Sym),
}

impl Term {
    pub fn constant(s: &str) -> Self {
        Term::Const(Sym::new(s))
    }

    pub fn var(s: &str) -> Self {
        Term::Var(Sym::new(s))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_const(&self) -> Option<&Sym> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn apply(&self, theta: &Substitution) -> Term {
        match self {
            Term::Var(v) => match theta.get(v) {
                Some(c) => Term::Const(c.clone()),
                None => self.clone(),
            },
            Term::Const(_) => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) | Term::Var(c) => f.write_str(c.as_str()),
        }
    }
}

pub type Substitution = BTreeMap<Sym, Sym>;

/// Ordinary atom. The derived order is the canonical one: predicate first,
/// then arguments lexicographically.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Atom {
    pub predicate: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: Sym::new(predicate),
            args,
        }
    }

    /// Ground atom from constant names.
    pub fn ground(predicate: &str, args: &[&str]) -> Self {
        Atom::new(predicate, args.iter().map(|a| Term::constant(a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn apply(&self, theta: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.apply(theta)).collect(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Sym> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", join(&self.args, ","))?;
        }
        Ok(())
    }
}

/// `&name[inputs](outputs)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ExternalAtom {
    pub name: Sym,
    pub inputs: Vec<Term>,
    pub outputs: Vec<Term>,
}

impl ExternalAtom {
    pub fn new(name: &str, inputs: Vec<Term>, outputs: Vec<Term>) -> Self {
        ExternalAtom {
            name: Sym::new(name),
            inputs,
            outputs,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.inputs.iter().chain(&self.outputs).all(|t| !t.is_var())
    }

    pub fn apply(&self, theta: &Substitution) -> ExternalAtom {
        ExternalAtom {
            name: self.name.clone(),
            inputs: self.inputs.iter().map(|t| t.apply(theta)).collect(),
            outputs: self.outputs.iter().map(|t| t.apply(theta)).collect(),
        }
    }
}

impl fmt::Display for ExternalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "&{}[{}]({})",
            self.name,
            join(&self.inputs, ","),
            join(&self.outputs, ",")
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BuiltinOp {
    Eq,
    Neq,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BuiltinAtom {
    pub op: BuiltinOp,
    pub left: Term,
    pub right: Term,
}

impl BuiltinAtom {
    /// Truth value on ground terms; `None` while a side is unbound.
    pub fn eval(&self) -> Option<bool> {
        match (&self.left, &self.right) {
            (Term::Const(a), Term::Const(b)) => Some(match self.op {
                BuiltinOp::Eq => a == b,
                BuiltinOp::Neq => a != b,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for BuiltinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            BuiltinOp::Eq => "=",
            BuiltinOp::Neq => "!=",
        };
        write!(f, "{} {} {}", self.left, op, self.right)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Literal {
    Ordinary(Atom),
    External(ExternalAtom),
    Builtin(BuiltinAtom),
}

impl Literal {
    pub fn apply(&self, theta: &Substitution) -> Literal {
        match self {
            Literal::Ordinary(a) => Literal::Ordinary(a.apply(theta)),
            Literal::External(e) => Literal::External(e.apply(theta)),
            Literal::Builtin(b) => Literal::Builtin(BuiltinAtom {
                op: b.op,
                left: b.left.apply(theta),
                right: b.right.apply(theta),
            }),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Literal::Ordinary(a) => a.args.iter().collect(),
            Literal::External(e) => e.inputs.iter().chain(&e.outputs).collect(),
            Literal::Builtin(b) => vec![&b.left, &b.right],
        }
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        self.terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn as_ordinary(&self) -> Option<&Atom> {
        match self {
            Literal::Ordinary(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_external(&self) -> Option<&ExternalAtom> {
        match self {
            Literal::External(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Ordinary(a) => a.fmt(f),
            Literal::External(e) => e.fmt(f),
            Literal::Builtin(b) => b.fmt(f),
        }
    }
}

/// `h1 | ... | hk :- b1, ..., bm, not bm+1, ..., not bn.`
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Rule {
    pub head: Vec<Atom>,
    pub pos: Vec<Literal>,
    pub neg: Vec<Literal>,
}

impl Rule {
    pub fn new(head: Vec<Atom>, pos: Vec<Literal>, neg: Vec<Literal>) -> Self {
        Rule { head, pos, neg }
    }

    pub fn fact(atom: Atom) -> Self {
        Rule {
            head: vec![atom],
            ..Default::default()
        }
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    /// Empty body and nonempty head; may be disjunctive.
    pub fn is_fact(&self) -> bool {
        !self.head.is_empty() && self.pos.is_empty() && self.neg.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.vars().is_empty()
    }

    pub fn has_external(&self) -> bool {
        self.body().any(|l| matches!(l, Literal::External(_)))
    }

    pub fn body(&self) -> impl Iterator<Item = &Literal> {
        self.pos.iter().chain(&self.neg)
    }

    pub fn externals(&self) -> impl Iterator<Item = (&ExternalAtom, bool)> {
        self.pos
            .iter()
            .filter_map(|l| l.as_external().map(|e| (e, true)))
            .chain(
                self.neg
                    .iter()
                    .filter_map(|l| l.as_external().map(|e| (e, false))),
            )
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut vs: BTreeSet<Sym> = self.head.iter().flat_map(|a| a.vars().cloned()).collect();
        for l in self.body() {
            vs.extend(l.vars());
        }
        vs
    }

    pub fn apply(&self, theta: &Substitution) -> Rule {
        Rule {
            head: self.head.iter().map(|a| a.apply(theta)).collect(),
            pos: self.pos.iter().map(|l| l.apply(theta)).collect(),
            neg: self.neg.iter().map(|l| l.apply(theta)).collect(),
        }
    }

    pub fn constants(&self) -> BTreeSet<Sym> {
        let mut cs = BTreeSet::new();
        for a in &self.head {
            collect_consts(a.args.iter(), &mut cs);
        }
        for l in self.body() {
            collect_consts(l.terms().into_iter(), &mut cs);
        }
        cs
    }
}

fn collect_consts<'a>(terms: impl Iterator<Item = &'a Term>, out: &mut BTreeSet<Sym>) {
    for t in terms {
        if let Term::Const(c) = t {
            out.insert(c.clone());
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = join(&self.head, " | ");
        let body: Vec<String> = self
            .pos
            .iter()
            .map(|l| l.to_string())
            .chain(self.neg.iter().map(|l| format!("not {l}")))
            .collect();
        match (head.is_empty(), body.is_empty()) {
            (false, true) => write!(f, "{head}."),
            (true, _) => write!(f, ":- {}.", body.join(", ")),
            (false, false) => write!(f, "{head} :- {}.", body.join(", ")),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
}

pub type RuleId = usize;

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.rules.iter().all(Rule::is_ground)
    }

    /// const(P): constants in ordinary and external atoms, including
    /// predicate names and names of external predicates.
    pub fn constants(&self) -> BTreeSet<Sym> {
        let mut cs = BTreeSet::new();
        for r in &self.rules {
            cs.extend(r.constants());
            for a in &r.head {
                cs.insert(a.predicate.clone());
            }
            for l in r.body() {
                match l {
                    Literal::Ordinary(a) => {
                        cs.insert(a.predicate.clone());
                    }
                    Literal::External(e) => {
                        cs.insert(e.name.clone());
                    }
                    Literal::Builtin(_) => {}
                }
            }
        }
        cs
    }

    /// Constants occurring as terms only (no predicate or external names).
    pub fn term_constants(&self) -> BTreeSet<Sym> {
        let mut cs = BTreeSet::new();
        for r in &self.rules {
            cs.extend(r.constants());
        }
        cs
    }

    /// Sub-program from a set of rule ids, in id order.
    pub fn subprogram<'a>(&self, ids: impl IntoIterator<Item = &'a RuleId>) -> Program {
        let ids: BTreeSet<RuleId> = ids.into_iter().copied().collect();
        Program::new(ids.into_iter().map(|i| self.rules[i].clone()).collect())
    }

    pub fn with_facts(&self, facts: &Interpretation) -> Program {
        let mut p = self.clone();
        p.rules.extend(facts_of(facts).rules);
        p
    }

    /// Single-atom facts, the extensional part.
    pub fn edb(&self) -> Interpretation {
        self.rules
            .iter()
            .filter(|r| r.is_fact() && r.head.len() == 1 && r.head[0].is_ground())
            .map(|r| r.head[0].clone())
            .collect()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Set of ground atoms; atoms not in the set are false.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Interpretation(pub BTreeSet<Atom>);

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.0.contains(a)
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        self.0.insert(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn union(&self, other: &Interpretation) -> Interpretation {
        Interpretation(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &Interpretation) -> Interpretation {
        Interpretation(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &Interpretation) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Atoms whose predicate is in `preds`.
    pub fn restrict_to(&self, preds: &BTreeSet<Sym>) -> Interpretation {
        self.0
            .iter()
            .filter(|a| preds.contains(&a.predicate))
            .cloned()
            .collect()
    }
}

impl FromIterator<Atom> for Interpretation {
    fn from_iter<T: IntoIterator<Item = Atom>>(iter: T) -> Self {
        Interpretation(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Interpretation {
    type Item = &'a Atom;
    type IntoIter = std::collections::btree_set::Iter<'a, Atom>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<&Atom> = self.0.iter().collect();
        write!(f, "{{{}}}", join(&atoms, ", "))
    }
}

pub(crate) fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Most general unifier of two atoms after renaming their variables apart.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.predicate != b.predicate || a.arity() != b.arity() {
        return None;
    }
    // Union-find over variable classes, tagged by side.
    #[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
    enum Node {
        L(Sym),
        R(Sym),
    }
    let mut parent: BTreeMap<Node, Node> = BTreeMap::new();
    let mut value: BTreeMap<Node, Sym> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<Node, Node>, n: Node) -> Node {
        let mut cur = n;
        while let Some(p) = parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }
    for (s, t) in a.args.iter().zip(&b.args) {
        match (s, t) {
            (Term::Const(x), Term::Const(y)) => {
                if x != y {
                    return None;
                }
            }
            (Term::Var(v), Term::Const(c)) | (Term::Const(c), Term::Var(v)) => {
                let node = if s.is_var() {
                    Node::L(v.clone())
                } else {
                    Node::R(v.clone())
                };
                let root = find(&mut parent, node);
                match value.get(&root) {
                    Some(old) if old != c => return None,
                    _ => {
                        value.insert(root, c.clone());
                    }
                }
            }
            (Term::Var(x), Term::Var(y)) => {
                let rx = find(&mut parent, Node::L(x.clone()));
                let ry = find(&mut parent, Node::R(y.clone()));
                if rx != ry {
                    match (value.get(&rx).cloned(), value.get(&ry).cloned()) {
                        (Some(cx), Some(cy)) if cx != cy => return None,
                        (vx, vy) => {
                            parent.insert(rx.clone(), ry.clone());
                            if let Some(c) = vx.or(vy) {
                                value.insert(ry, c);
                            }
                        }
                    }
                }
            }
        }
    }
    // Only the bindings of the left atom's variables to constants are
    // reported; the existence of a unifier is what callers need.
    let mut theta = Substitution::new();
    for v in a.vars() {
        let root = find(&mut parent, Node::L(v.clone()));
        if let Some(c) = value.get(&root) {
            theta.insert(v.clone(), c.clone());
        }
    }
    Some(theta)
}

pub fn unifies(a: &Atom, b: &Atom) -> bool {
    unify(a, b).is_some()
}

/// rθ, failing if θ does not bind every variable of r.
pub fn ground_rule(r: &Rule, theta: &Substitution) -> Result<Rule, HexError> {
    let g = r.apply(theta);
    if let Some(v) = g.vars().into_iter().next() {
        return Err(HexError::UnboundVariable(v.to_string()));
    }
    Ok(g)
}

/// Truth of a ground literal (positive reading) under I.
pub fn literal_holds(
    l: &Literal,
    i: &Interpretation,
    reg: &OracleRegistry,
) -> Result<bool, HexError> {
    match l {
        Literal::Ordinary(a) => Ok(i.contains(a)),
        Literal::External(e) => Ok(reg.eval_oracle(e, i)?),
        Literal::Builtin(b) => b
            .eval()
            .ok_or_else(|| HexError::UnboundVariable(b.to_string())),
    }
}

pub fn body_holds(r: &Rule, i: &Interpretation, reg: &OracleRegistry) -> Result<bool, HexError> {
    for l in &r.pos {
        if !literal_holds(l, i, reg)? {
            return Ok(false);
        }
    }
    for l in &r.neg {
        if literal_holds(l, i, reg)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// I ⊨ r for a ground rule r.
pub fn satisfies_rule(
    i: &Interpretation,
    r: &Rule,
    reg: &OracleRegistry,
) -> Result<bool, HexError> {
    if r.head.iter().any(|a| i.contains(a)) {
        return Ok(true);
    }
    Ok(!body_holds(r, i, reg)?)
}

/// I ⊨ P for a ground program P.
pub fn satisfies(i: &Interpretation, p: &Program, reg: &OracleRegistry) -> Result<bool, HexError> {
    for r in &p.rules {
        if !satisfies_rule(i, r, reg)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// FLP reduct: the ground rules whose body is satisfied by I.
pub fn flp_reduct(
    p: &Program,
    i: &Interpretation,
    reg: &OracleRegistry,
) -> Result<Program, HexError> {
    let mut out = Vec::new();
    for r in &p.rules {
        if body_holds(r, i, reg)? {
            out.push(r.clone());
        }
    }
    Ok(Program::new(out))
}

/// Ground head atoms of all instances of P's rules over `consts`.
/// Builtins are respected; ordinary and external body atoms are not.
pub fn ground_heads(p: &Program, consts: &BTreeSet<Sym>) -> BTreeSet<Atom> {
    let consts: Vec<Sym> = consts.iter().cloned().collect();
    let mut out = BTreeSet::new();
    for r in &p.rules {
        if r.head.is_empty() {
            continue;
        }
        for theta in all_substitutions(&r.vars(), &consts) {
            let g = r.apply(&theta);
            let builtins_ok = g
                .pos
                .iter()
                .all(|l| !matches!(l, Literal::Builtin(b) if b.eval() == Some(false)));
            if builtins_ok {
                out.extend(g.head);
            }
        }
    }
    out
}

/// Every substitution from `vars` into `consts` (|consts|^|vars| of them).
pub fn all_substitutions(vars: &BTreeSet<Sym>, consts: &[Sym]) -> Vec<Substitution> {
    let vars: Vec<&Sym> = vars.iter().collect();
    let mut out = vec![Substitution::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * consts.len());
        for theta in &out {
            for c in consts {
                let mut t = theta.clone();
                t.insert(v.clone(), c.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// One fact per atom of I.
pub fn facts_of(i: &Interpretation) -> Program {
    Program::new(i.iter().cloned().map(Rule::fact).collect())
}
