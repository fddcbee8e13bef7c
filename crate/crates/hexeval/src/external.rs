//! External predicates: type signatures, input projection, the oracle
//! registry, built-in oracles and conditional table oracles (`.etab`).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::syntax::{Atom, ExternalAtom, Interpretation, Sym, Term};
use crate::HexError;

pub type Tuple = Vec<Sym>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InputType {
    Const,
    /// Predicate input of the given arity.
    Pred(usize),
}

impl fmt::Display for InputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputType::Const => f.write_str("const"),
            InputType::Pred(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeSignature {
    pub inputs: Vec<InputType>,
    pub output_arity: usize,
}

impl TypeSignature {
    pub fn new(inputs: Vec<InputType>, output_arity: usize) -> Self {
        TypeSignature {
            inputs,
            output_arity,
        }
    }
}

/// Π(I, X) for one input position.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum ProjectedInput {
    Const(Sym),
    Extension {
        predicate: Sym,
        tuples: BTreeSet<Tuple>,
    },
}

impl ProjectedInput {
    pub fn constant(&self) -> Option<&Sym> {
        match self {
            ProjectedInput::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn tuples(&self) -> Option<&BTreeSet<Tuple>> {
        match self {
            ProjectedInput::Extension { tuples, .. } => Some(tuples),
            _ => None,
        }
    }
}

/// Atoms of I with predicate `p` and arity `arity`, as argument tuples.
pub fn project(i: &Interpretation, p: &Sym, arity: usize) -> BTreeSet<Tuple> {
    let start = Atom {
        predicate: p.clone(),
        args: Vec::new(),
    };
    i.0.range(start..)
        .take_while(|a| &a.predicate == p)
        .filter(|a| a.arity() == arity)
        .filter_map(|a| {
            a.args
                .iter()
                .map(|t| t.as_const().cloned())
                .collect::<Option<Tuple>>()
        })
        .collect()
}

/// Evaluation function of an external predicate. `outputs` is the
/// extensional form; `holds` decides a single output tuple.
pub trait Oracle: Send + Sync {
    fn outputs(&self, inputs: &[ProjectedInput]) -> Result<BTreeSet<Tuple>, HexError>;

    fn holds(&self, inputs: &[ProjectedInput], output: &[Sym]) -> Result<bool, HexError> {
        Ok(self.outputs(inputs)?.iter().any(|t| t.as_slice() == output))
    }
}

#[derive(Clone)]
pub struct ExternalPredicateDef {
    pub name: Sym,
    pub signature: TypeSignature,
    pub monotonic: bool,
    pub oracle: Arc<dyn Oracle>,
}

impl fmt::Debug for ExternalPredicateDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalPredicateDef")
            .field("name", &self.name)
            .field("signature", &self.signature)
            .field("monotonic", &self.monotonic)
            .finish()
    }
}

/// Registered external predicates plus a shared oracle call counter.
#[derive(Clone, Debug, Default)]
pub struct OracleRegistry {
    defs: BTreeMap<Sym, ExternalPredicateDef>,
    calls: Arc<AtomicU64>,
}

impl OracleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with `&concat`, `&not` and `&reach`.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        for def in builtin_defs() {
            r.register(def).expect("builtin names are distinct");
        }
        r
    }

    pub fn register(&mut self, def: ExternalPredicateDef) -> Result<(), HexError> {
        if self.defs.contains_key(&def.name) {
            return Err(HexError::SignatureConflict(def.name.to_string()));
        }
        self.defs.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn get(&self, name: &Sym) -> Result<&ExternalPredicateDef, HexError> {
        self.defs
            .get(name)
            .ok_or_else(|| HexError::UnknownExternalPredicate(name.to_string()))
    }

    pub fn contains(&self, name: &Sym) -> bool {
        self.defs.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &Sym> {
        self.defs.keys()
    }

    pub fn is_monotonic(&self, name: &Sym) -> Result<bool, HexError> {
        Ok(self.get(name)?.monotonic)
    }

    pub fn oracle_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Signature check of an external atom occurrence.
    pub fn check_atom(&self, e: &ExternalAtom) -> Result<&ExternalPredicateDef, HexError> {
        let def = self.get(&e.name)?;
        let sig = &def.signature;
        if sig.inputs.len() != e.inputs.len() || sig.output_arity != e.outputs.len() {
            return Err(HexError::ArityMismatch {
                name: e.name.to_string(),
                detail: format!(
                    "expected {} inputs and {} outputs, found {} and {}",
                    sig.inputs.len(),
                    sig.output_arity,
                    e.inputs.len(),
                    e.outputs.len()
                ),
            });
        }
        Ok(def)
    }

    /// Π(I, X1..Xn) for the (ground) inputs of an external atom.
    pub fn project_inputs(
        &self,
        name: &Sym,
        inputs: &[Term],
        i: &Interpretation,
    ) -> Result<Vec<ProjectedInput>, HexError> {
        let def = self.get(name)?;
        if def.signature.inputs.len() != inputs.len() {
            return Err(HexError::ArityMismatch {
                name: name.to_string(),
                detail: format!(
                    "expected {} inputs, found {}",
                    def.signature.inputs.len(),
                    inputs.len()
                ),
            });
        }
        inputs
            .iter()
            .zip(&def.signature.inputs)
            .map(|(t, ty)| {
                let c = t
                    .as_const()
                    .ok_or_else(|| HexError::UnboundVariable(format!("&{name}")))?;
                Ok(match ty {
                    InputType::Const => ProjectedInput::Const(c.clone()),
                    InputType::Pred(n) => ProjectedInput::Extension {
                        predicate: c.clone(),
                        tuples: project(i, c, *n),
                    },
                })
            })
            .collect()
    }

    /// f_&g(I, inputs, outputs) for a ground external atom.
    pub fn eval_oracle(&self, e: &ExternalAtom, i: &Interpretation) -> Result<bool, HexError> {
        let def = self.check_atom(e)?;
        let proj = self.project_inputs(&e.name, &e.inputs, i)?;
        let out: Tuple = e
            .outputs
            .iter()
            .map(|t| {
                t.as_const()
                    .cloned()
                    .ok_or_else(|| HexError::UnboundVariable(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        def.oracle.holds(&proj, &out)
    }

    /// F_&g(I, inputs): every output tuple the oracle accepts.
    pub fn extensional_eval(
        &self,
        name: &Sym,
        inputs: &[Term],
        i: &Interpretation,
    ) -> Result<BTreeSet<Tuple>, HexError> {
        let def = self.get(name)?;
        let proj = self.project_inputs(name, inputs, i)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let outs = def.oracle.outputs(&proj)?;
        if let Some(bad) = outs.iter().find(|t| t.len() != def.signature.output_arity) {
            return Err(HexError::ArityMismatch {
                name: name.to_string(),
                detail: format!("oracle returned a tuple of length {}", bad.len()),
            });
        }
        Ok(outs)
    }
}

/// Largest number of subset pairs `check_monotonic` will examine.
pub const MONOTONICITY_PAIR_LIMIT: u128 = 1 << 16;

/// Decides monotonicity of `&name` by brute force over a finite universe of
/// ground atoms: for every input tuple over the universe's symbols and every
/// I ⊂ I' ⊆ universe that differ in one atom, F(I) ⊆ F(I').
pub fn check_monotonic(
    reg: &OracleRegistry,
    name: &Sym,
    universe: &Interpretation,
) -> Result<bool, HexError> {
    let def = reg.get(name)?;
    let atoms: Vec<&Atom> = universe.iter().collect();
    let n = atoms.len();
    let pairs = if n == 0 {
        0u128
    } else {
        (n as u128) << (n - 1)
    };
    if pairs > MONOTONICITY_PAIR_LIMIT {
        return Err(HexError::UniverseTooLarge {
            pairs,
            limit: MONOTONICITY_PAIR_LIMIT,
        });
    }
    let mut consts: BTreeSet<Sym> = BTreeSet::new();
    let mut preds: BTreeSet<Sym> = BTreeSet::new();
    for a in &atoms {
        preds.insert(a.predicate.clone());
        consts.extend(a.args.iter().filter_map(|t| t.as_const().cloned()));
    }
    let all_syms: Vec<Sym> = consts.union(&preds).cloned().collect();
    let mut input_tuples: Vec<Vec<Term>> = vec![Vec::new()];
    for ty in &def.signature.inputs {
        let choices: Vec<&Sym> = match ty {
            InputType::Const => all_syms.iter().collect(),
            InputType::Pred(_) => preds.iter().collect(),
        };
        input_tuples = input_tuples
            .into_iter()
            .flat_map(|t| {
                choices.iter().map(move |c| {
                    let mut t = t.clone();
                    t.push(Term::Const((*c).clone()));
                    t
                })
            })
            .collect();
    }
    let consts: Vec<Sym> = consts.into_iter().collect();
    let out_tuples = || -> Vec<Tuple> {
        let mut ts: Vec<Tuple> = vec![Vec::new()];
        for _ in 0..def.signature.output_arity {
            ts = ts
                .into_iter()
                .flat_map(|t| {
                    consts.iter().map(move |c| {
                        let mut t = t.clone();
                        t.push(c.clone());
                        t
                    })
                })
                .collect();
        }
        ts
    };
    let subset = |mask: u64| -> Interpretation {
        atoms
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, a)| (*a).clone())
            .collect()
    };
    let outputs_at = |inputs: &[Term], i: &Interpretation| -> Result<BTreeSet<Tuple>, HexError> {
        match reg.extensional_eval(name, inputs, i) {
            Err(HexError::InfiniteOutputGuard(_)) => {
                let proj = reg.project_inputs(name, inputs, i)?;
                let mut out = BTreeSet::new();
                for t in out_tuples() {
                    if def.oracle.holds(&proj, &t)? {
                        out.insert(t);
                    }
                }
                Ok(out)
            }
            r => r,
        }
    };
    for inputs in &input_tuples {
        let mut cache: BTreeMap<u64, BTreeSet<Tuple>> = BTreeMap::new();
        for mask in 0..(1u64 << n) {
            let small = match cache.get(&mask) {
                Some(s) => s.clone(),
                None => {
                    let s = outputs_at(inputs, &subset(mask))?;
                    cache.insert(mask, s.clone());
                    s
                }
            };
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    continue;
                }
                let bigger = mask | 1 << k;
                let big = match cache.get(&bigger) {
                    Some(s) => s.clone(),
                    None => {
                        let s = outputs_at(inputs, &subset(bigger))?;
                        cache.insert(bigger, s.clone());
                        s
                    }
                };
                if !small.is_subset(&big) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(s)
}

/// `&concat[X,Y](Z)`: Z is X followed by Y.
pub struct ConcatOracle;

impl ConcatOracle {
    fn concat(a: &Sym, b: &Sym) -> Sym {
        let quoted = a.as_str().starts_with('"') || b.as_str().starts_with('"');
        let joined = format!("{}{}", unquote(a.as_str()), unquote(b.as_str()));
        if quoted {
            Sym::new(&format!("\"{joined}\""))
        } else {
            Sym::new(&joined)
        }
    }
}

impl Oracle for ConcatOracle {
    fn outputs(&self, inputs: &[ProjectedInput]) -> Result<BTreeSet<Tuple>, HexError> {
        match (inputs[0].constant(), inputs[1].constant()) {
            (Some(a), Some(b)) => Ok([vec![Self::concat(a, b)]].into_iter().collect()),
            _ => Err(HexError::ArityMismatch {
                name: "concat".into(),
                detail: "constant inputs expected".into(),
            }),
        }
    }

    fn holds(&self, inputs: &[ProjectedInput], output: &[Sym]) -> Result<bool, HexError> {
        let (a, b) = (inputs[0].constant(), inputs[1].constant());
        let (Some(a), Some(b)) = (a, b) else {
            return Err(HexError::ArityMismatch {
                name: "concat".into(),
                detail: "constant inputs expected".into(),
            });
        };
        let (x, y, z) = (
            unquote(a.as_str()),
            unquote(b.as_str()),
            unquote(output[0].as_str()),
        );
        Ok(z.len() == x.len() + y.len() && z.starts_with(x) && z.ends_with(y))
    }
}

/// `&not[p](c)`: true iff p(c) is false. Not output-enumerable.
pub struct NotOracle;

impl Oracle for NotOracle {
    fn outputs(&self, _inputs: &[ProjectedInput]) -> Result<BTreeSet<Tuple>, HexError> {
        Err(HexError::InfiniteOutputGuard("not".into()))
    }

    fn holds(&self, inputs: &[ProjectedInput], output: &[Sym]) -> Result<bool, HexError> {
        Ok(!inputs[0].tuples().is_some_and(|ts| ts.contains(output)))
    }
}

/// `&reach[edge,a](X)`: X is reachable from a by one or more edges.
pub struct ReachOracle;

impl Oracle for ReachOracle {
    fn outputs(&self, inputs: &[ProjectedInput]) -> Result<BTreeSet<Tuple>, HexError> {
        let edges = inputs[0].tuples().cloned().unwrap_or_default();
        let start = inputs[1]
            .constant()
            .ok_or_else(|| HexError::ArityMismatch {
                name: "reach".into(),
                detail: "constant start expected".into(),
            })?;
        let mut adj: BTreeMap<&Sym, Vec<&Sym>> = BTreeMap::new();
        for e in &edges {
            adj.entry(&e[0]).or_default().push(&e[1]);
        }
        let mut seen: BTreeSet<Sym> = BTreeSet::new();
        let mut queue: VecDeque<&Sym> = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in adj.get(x).into_iter().flatten() {
                if seen.insert((*y).clone()) {
                    queue.push_back(y);
                }
            }
        }
        Ok(seen.into_iter().map(|s| vec![s]).collect())
    }
}

fn builtin_defs() -> Vec<ExternalPredicateDef> {
    vec![
        ExternalPredicateDef {
            name: Sym::new("concat"),
            signature: TypeSignature::new(vec![InputType::Const, InputType::Const], 1),
            monotonic: true,
            oracle: Arc::new(ConcatOracle),
        },
        ExternalPredicateDef {
            name: Sym::new("not"),
            signature: TypeSignature::new(vec![InputType::Pred(1)], 1),
            monotonic: false,
            oracle: Arc::new(NotOracle),
        },
        ExternalPredicateDef {
            name: Sym::new("reach"),
            signature: TypeSignature::new(vec![InputType::Pred(2), InputType::Const], 1),
            monotonic: true,
            oracle: Arc::new(ReachOracle),
        },
    ]
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Guard {
    pub positive: bool,
    /// 0-based input position.
    pub input: usize,
    pub tuple: Tuple,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TableRow {
    pub emit: Tuple,
    pub guards: Vec<Guard>,
}

/// Finite table of conditional rows: a row's tuple is emitted when all of
/// its membership guards hold on the projected inputs.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ConditionalTableOracle {
    pub rows: Vec<TableRow>,
}

impl ConditionalTableOracle {
    fn row_fires(row: &TableRow, inputs: &[ProjectedInput]) -> bool {
        row.guards.iter().all(|g| {
            let present = inputs
                .get(g.input)
                .and_then(|p| p.tuples())
                .is_some_and(|ts| ts.contains(&g.tuple));
            present == g.positive
        })
    }
}

impl Oracle for ConditionalTableOracle {
    fn outputs(&self, inputs: &[ProjectedInput]) -> Result<BTreeSet<Tuple>, HexError> {
        Ok(self
            .rows
            .iter()
            .filter(|r| Self::row_fires(r, inputs))
            .map(|r| r.emit.clone())
            .collect())
    }

    fn holds(&self, inputs: &[ProjectedInput], output: &[Sym]) -> Result<bool, HexError> {
        Ok(self
            .rows
            .iter()
            .any(|r| r.emit.as_slice() == output && Self::row_fires(r, inputs)))
    }
}

/// Loads every table of a table file.
pub fn load_table_oracles(path: &Path) -> Result<Vec<ExternalPredicateDef>, HexError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HexError::Io(format!("{}: {e}", path.display())))?;
    parse_table_oracles(&text)
}

pub fn load_table_oracle(path: &Path) -> Result<ExternalPredicateDef, HexError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HexError::Io(format!("{}: {e}", path.display())))?;
    parse_table_oracle(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Open,
    Close,
    Comma,
    Dot,
    Eq,
}

fn tokenize_line(line: &str, lineno: usize) -> Result<Vec<Tok>, HexError> {
    let err = |m: &str| HexError::TableParse {
        line: lineno,
        message: m.to_string(),
    };
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            '%' => break,
            c if c.is_whitespace() => k += 1,
            '(' => {
                toks.push(Tok::Open);
                k += 1
            }
            ')' => {
                toks.push(Tok::Close);
                k += 1
            }
            ',' => {
                toks.push(Tok::Comma);
                k += 1
            }
            '.' => {
                toks.push(Tok::Dot);
                k += 1
            }
            '=' => {
                toks.push(Tok::Eq);
                k += 1
            }
            '"' => {
                let start = k;
                k += 1;
                while k < chars.len() && chars[k] != '"' {
                    k += 1;
                }
                if k == chars.len() {
                    return Err(err("unterminated string"));
                }
                k += 1;
                toks.push(Tok::Word(chars[start..k].iter().collect()));
            }
            c if c.is_alphanumeric() || c == '_' || c == '&' => {
                let start = k;
                while k < chars.len()
                    && (chars[k].is_alphanumeric() || chars[k] == '_' || chars[k] == '&')
                {
                    k += 1;
                }
                toks.push(Tok::Word(chars[start..k].iter().collect()));
            }
            other => return Err(err(&format!("unexpected character '{other}'"))),
        }
    }
    Ok(toks)
}

struct LineParser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
}

impl LineParser {
    fn err(&self, m: impl Into<String>) -> HexError {
        HexError::TableParse {
            line: self.line,
            message: m.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn expect(&mut self, t: Tok) -> Result<(), HexError> {
        match self.next() {
            Some(x) if x == t => Ok(()),
            other => Err(self.err(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn word(&mut self) -> Result<String, HexError> {
        match self.next() {
            Some(Tok::Word(w)) => Ok(w),
            other => Err(self.err(format!("expected a word, found {other:?}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), HexError> {
        let w = self.word()?;
        if w == kw {
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}', found '{w}'")))
        }
    }

    fn tuple(&mut self) -> Result<Vec<String>, HexError> {
        self.expect(Tok::Open)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::Close) {
            self.next();
            return Ok(out);
        }
        loop {
            out.push(self.word()?);
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::Close) => return Ok(out),
                other => return Err(self.err(format!("expected ',' or ')', found {other:?}"))),
            }
        }
    }

    fn number(&mut self) -> Result<usize, HexError> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| self.err(format!("expected a number, found '{w}'")))
    }

    fn assignment(&mut self, key: &str) -> Result<(), HexError> {
        self.keyword(key)?;
        self.expect(Tok::Eq)
    }

    fn done(&mut self) -> Result<(), HexError> {
        if self.peek() == Some(&Tok::Dot) {
            self.next();
        }
        match self.next() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {t:?}"))),
        }
    }
}

fn check_symbol(w: &str, p: &LineParser) -> Result<Sym, HexError> {
    let ok = w.starts_with('"')
        || w.chars().all(|c| c.is_ascii_digit())
        || (w.starts_with(|c: char| c.is_ascii_lowercase())
            && w.chars().all(|c| c.is_alphanumeric() || c == '_'));
    if ok {
        Ok(Sym::new(w))
    } else {
        Err(p.err(format!("'{w}' is not a constant")))
    }
}

/// Parses the `.etab` text format. Line 1 (after comments) is the header
/// `&NAME in=(T1,...,Tn) out=M monotonic=yes|no`; every further line is a
/// row `emit (c1,...,cM) [if has|hasnot I (d1,...,dk) [and ...]*]`.
/// Parses a file holding exactly one table.
pub fn parse_table_oracle(text: &str) -> Result<ExternalPredicateDef, HexError> {
    let mut defs = parse_table_oracles(text)?;
    if defs.len() != 1 {
        return Err(HexError::TableParse {
            line: 1,
            message: format!("expected one table, found {}", defs.len()),
        });
    }
    Ok(defs.remove(0))
}

/// Parses a file of tables. Each header starts or resumes the table it
/// names; rows belong to the most recent header.
pub fn parse_table_oracles(text: &str) -> Result<Vec<ExternalPredicateDef>, HexError> {
    let mut tables: Vec<((Sym, TypeSignature, bool), Vec<TableRow>)> = Vec::new();
    let mut current: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = tokenize_line(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser {
            toks,
            pos: 0,
            line: lineno,
        };
        let first = p.word()?;
        if let Some(name) = first.strip_prefix('&') {
            if name.is_empty() {
                return Err(p.err("missing predicate name"));
            }
            p.assignment("in")?;
            let types = p
                .tuple()?
                .into_iter()
                .map(|t| {
                    if t == "const" {
                        Ok(InputType::Const)
                    } else {
                        t.parse()
                            .map(InputType::Pred)
                            .map_err(|_| p.err(format!("bad input type '{t}'")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            p.assignment("out")?;
            let out = p.number()?;
            p.assignment("monotonic")?;
            let mono = match p.word()?.as_str() {
                "yes" => true,
                "no" => false,
                other => return Err(p.err(format!("monotonic must be yes or no, found '{other}'"))),
            };
            p.done()?;
            let decl = (Sym::new(name), TypeSignature::new(types, out), mono);
            match tables.iter().position(|(h, _)| h.0 == decl.0) {
                Some(k) if tables[k].0 == decl => current = Some(k),
                Some(_) => return Err(HexError::SignatureConflict(name.to_string())),
                None => {
                    tables.push((decl, Vec::new()));
                    current = Some(tables.len() - 1);
                }
            }
            continue;
        }
        let Some(cur) = current else {
            return Err(p.err("row before header"));
        };
        let (name, sig, _) = &tables[cur].0;
        if first != "emit" {
            return Err(p.err(format!("expected 'emit', found '{first}'")));
        }
        let emit = p
            .tuple()?
            .iter()
            .map(|w| check_symbol(w, &p))
            .collect::<Result<Tuple, _>>()?;
        if emit.len() != sig.output_arity {
            return Err(HexError::ArityMismatch {
                name: name.to_string(),
                detail: format!(
                    "line {lineno}: emit tuple has {} values, expected {}",
                    emit.len(),
                    sig.output_arity
                ),
            });
        }
        let mut guards = Vec::new();
        if matches!(p.peek(), Some(Tok::Word(w)) if w == "if") {
            p.next();
            loop {
                let positive = match p.word()?.as_str() {
                    "has" => true,
                    "hasnot" => false,
                    other => {
                        return Err(p.err(format!("expected 'has' or 'hasnot', found '{other}'")))
                    }
                };
                let pos = p.number()?;
                if pos == 0 || pos > sig.inputs.len() {
                    return Err(p.err(format!("input position {pos} out of range")));
                }
                let tuple = p
                    .tuple()?
                    .iter()
                    .map(|w| check_symbol(w, &p))
                    .collect::<Result<Tuple, _>>()?;
                match sig.inputs[pos - 1] {
                    InputType::Pred(n) if n == tuple.len() => {}
                    InputType::Pred(n) => return Err(HexError::ArityMismatch {
                        name: name.to_string(),
                        detail: format!(
                            "line {lineno}: guard tuple has {} values, input {pos} has arity {n}",
                            tuple.len()
                        ),
                    }),
                    InputType::Const => {
                        return Err(p.err(format!("input {pos} is not a predicate input")))
                    }
                }
                guards.push(Guard {
                    positive,
                    input: pos - 1,
                    tuple,
                });
                if matches!(p.peek(), Some(Tok::Word(w)) if w == "and") {
                    p.next();
                } else {
                    break;
                }
            }
        }
        p.done()?;
        tables[cur].1.push(TableRow { emit, guards });
    }
    if tables.is_empty() {
        return Err(HexError::TableParse {
            line: 1,
            message: "missing header".into(),
        });
    }
    tables
        .into_iter()
        .map(|((name, signature, monotonic), rows)| {
            if monotonic && rows.iter().any(|r| r.guards.iter().any(|g| !g.positive)) {
                return Err(HexError::TableParse {
                    line: 1,
                    message: format!("&{name} is declared monotonic but uses a negative guard"),
                });
            }
            Ok(ExternalPredicateDef {
                name,
                signature,
                monotonic,
                oracle: Arc::new(ConditionalTableOracle { rows }),
            })
        })
        .collect()
}
