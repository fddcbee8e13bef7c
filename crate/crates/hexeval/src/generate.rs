//! Seeded instance generators: small random programs with table oracles for
//! property tests, and the reviewer selection (rs) and multi-context system
//! (mcs) benchmark shapes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::external::{parse_table_oracles, OracleRegistry};
use crate::parser::parse_program;
use crate::syntax::{Atom, ExternalAtom, Literal, Program, Rule, Term};
use crate::HexError;

pub const MAX_RS_TRACKS: usize = 4;
pub const MAX_MCS_CONTEXTS: usize = 4;
pub const MCS_ATOMS_PER_CONTEXT: usize = 2;

/// A program text with the table oracles it uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub program: String,
    pub tables: String,
}

impl Instance {
    /// Parses the program and registers the tables next to the built-in
    /// oracles.
    pub fn load(&self) -> Result<(Program, OracleRegistry), HexError> {
        let program = parse_program(&self.program)?;
        let mut reg = OracleRegistry::with_builtins();
        if !self.tables.trim().is_empty() {
            for def in parse_table_oracles(&self.tables)? {
                reg.register(def)?;
            }
        }
        Ok((program, reg))
    }

    /// Writes `<stem>.hex` and `<stem>.etab` into `dir`.
    pub fn write_to(
        &self,
        dir: &std::path::Path,
        stem: &str,
    ) -> Result<(std::path::PathBuf, std::path::PathBuf), HexError> {
        let io = |e: std::io::Error| HexError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        let hex = dir.join(format!("{stem}.hex"));
        let etab = dir.join(format!("{stem}.etab"));
        std::fs::write(&hex, &self.program).map_err(io)?;
        std::fs::write(&etab, &self.tables).map_err(io)?;
        Ok((hex, etab))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RandomShape {
    pub max_rules: usize,
    pub constants: usize,
    pub max_externals: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_rules: 6,
            constants: 3,
            max_externals: 2,
        }
    }
}

const PREDICATES: [&str; 3] = ["p", "q", "r"];
const CONSTANTS: [&str; 3] = ["a", "b", "c"];

struct RuleGen<'a> {
    rng: &'a mut ChaCha8Rng,
    consts: &'a [&'static str],
}

impl RuleGen<'_> {
    fn term(&mut self, vars: bool) -> Term {
        if vars && self.rng.gen_bool(0.4) {
            Term::var(["X", "Y"][self.rng.gen_range(0..2)])
        } else {
            Term::constant(self.consts[self.rng.gen_range(0..self.consts.len())])
        }
    }

    fn atom(&mut self, vars: bool) -> Atom {
        let p = PREDICATES[self.rng.gen_range(0..PREDICATES.len())];
        Atom::new(p, vec![self.term(vars)])
    }

    fn constant(&mut self) -> Term {
        Term::constant(self.consts[self.rng.gen_range(0..self.consts.len())])
    }
}

/// Replaces variables not bound by a positive ordinary atom or a positive
/// external output with constants.
fn make_safe(rule: Rule, g: &mut RuleGen) -> Rule {
    let mut bound = BTreeSet::new();
    for l in &rule.pos {
        match l {
            Literal::Ordinary(a) => bound.extend(a.vars().cloned()),
            Literal::External(e) => bound.extend(e.outputs.iter().filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                Term::Const(_) => None,
            })),
            Literal::Builtin(_) => {}
        }
    }
    let mut theta = crate::syntax::Substitution::new();
    for v in rule.vars() {
        if !bound.contains(&v) {
            let c = g.constant();
            theta.insert(v, c.as_const().expect("constant").clone());
        }
    }
    rule.apply(&theta)
}

/// A random program over unary predicates p, q, r with disjunctive heads,
/// constraints, negation and up to `max_externals` external atoms backed by
/// random table oracles `&t0`, `&t1`.
pub fn random_instance(seed: u64, shape: RandomShape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nconst = shape.constants.clamp(1, CONSTANTS.len());
    let consts = &CONSTANTS[..nconst];
    let nrules = rng.gen_range(1..=shape.max_rules.max(1));
    let mut externals = 0;
    let mut rules = Vec::new();
    let mut tables = String::new();
    for _ in 0..nrules {
        let mut g = RuleGen {
            rng: &mut rng,
            consts,
        };
        let head_len = match g.rng.gen_range(0..10) {
            0 => 0,
            1..=3 => 2,
            _ => 1,
        };
        let head: Vec<Atom> = (0..head_len).map(|_| g.atom(true)).collect();
        let npos = g.rng.gen_range(if head_len == 0 { 1 } else { 0 }..=2);
        let mut pos: Vec<Literal> = (0..npos).map(|_| Literal::Ordinary(g.atom(true))).collect();
        let mut neg: Vec<Literal> = (0..g.rng.gen_range(0..=1))
            .map(|_| Literal::Ordinary(g.atom(true)))
            .collect();
        if externals < shape.max_externals && g.rng.gen_bool(0.35) {
            let name = format!("t{externals}");
            let input = PREDICATES[g.rng.gen_range(0..PREDICATES.len())];
            let out = g.term(true);
            let e = Literal::External(ExternalAtom::new(
                &name,
                vec![Term::constant(input)],
                vec![out],
            ));
            if g.rng.gen_bool(0.7) {
                pos.push(e);
            } else {
                neg.push(e);
            }
            let monotonic = g.rng.gen_bool(0.5);
            let _ = writeln!(
                tables,
                "&{name} in=(1) out=1 monotonic={}",
                if monotonic { "yes" } else { "no" }
            );
            for c in consts {
                if !g.rng.gen_bool(0.6) {
                    continue;
                }
                let _ = write!(tables, "emit ({c})");
                if g.rng.gen_bool(0.7) {
                    let kw = if !monotonic && g.rng.gen_bool(0.5) {
                        "hasnot"
                    } else {
                        "has"
                    };
                    let _ = write!(
                        tables,
                        " if {kw} 1 ({})",
                        consts[g.rng.gen_range(0..consts.len())]
                    );
                }
                tables.push('\n');
            }
            externals += 1;
        }
        rules.push(make_safe(Rule::new(head, pos, neg), &mut g));
    }
    Instance {
        program: Program::new(rules).to_string(),
        tables,
    }
}

fn size_guard(kind: &str, size: usize, max: usize) -> Result<(), HexError> {
    if size == 0 || size > max {
        return Err(HexError::SizeTooLarge(format!(
            "{kind} size must be between 1 and {max}, got {size}"
        )));
    }
    Ok(())
}

/// Reviewer selection with `tracks` tracks of three papers and three
/// reviewers each. Every paper gets one reviewer of its track, no reviewer
/// takes two papers, some pairs are excluded by local constraints and some
/// by external conflict tables. The excluded pairs avoid one random
/// assignment per track, so the instance is satisfiable.
pub fn generate_rs(tracks: usize, seed: u64) -> Result<Instance, HexError> {
    size_guard("rs", tracks, MAX_RS_TRACKS)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prog = String::new();
    let mut tables = String::new();
    for t in 1..=tracks {
        let papers: Vec<String> = (1..=3).map(|j| format!("p{t}_{j}")).collect();
        let reviewers: Vec<String> = (1..=3).map(|j| format!("r{t}_{j}")).collect();
        for p in &papers {
            let _ = writeln!(prog, "paper({p},t{t}).");
        }
        for r in &reviewers {
            let _ = writeln!(prog, "reviewer({r},t{t}).");
        }
        let guess: Vec<String> = reviewers.iter().map(|r| format!("assign({r},P)")).collect();
        let _ = writeln!(prog, "{} :- paper(P,t{t}).", guess.join(" | "));
        let mut perm = [0usize, 1, 2];
        perm.shuffle(&mut rng);
        let mut free: Vec<(usize, usize)> = (0..3)
            .flat_map(|r| (0..3).map(move |p| (r, p)))
            .filter(|&(r, p)| perm[p] != r)
            .collect();
        free.shuffle(&mut rng);
        let nlocal = rng.gen_range(0..=2);
        for &(r, p) in &free[..nlocal] {
            let _ = writeln!(prog, ":- assign({},{}).", reviewers[r], papers[p]);
        }
        let _ = writeln!(prog, ":- assign(R,P), &conflict{t}[assign](R,P).");
        let _ = writeln!(tables, "&conflict{t} in=(2) out=2 monotonic=yes");
        for &(r, p) in &free[nlocal..nlocal + 2] {
            let (r, p) = (&reviewers[r], &papers[p]);
            let _ = writeln!(tables, "emit ({r},{p}) if has 1 ({r},{p})");
        }
    }
    prog.push_str(":- assign(R,P1), assign(R,P2), P1 != P2.\n");
    Ok(Instance {
        program: prog,
        tables,
    })
}

/// Multi-context system with `contexts` contexts of two belief atoms each.
/// Beliefs are guessed, bridge rules import beliefs of lower-numbered
/// contexts, and a nonmonotonic table per context lists one or two
/// acceptable belief sets for every combination of bridge atoms.
pub fn generate_mcs(contexts: usize, seed: u64) -> Result<Instance, HexError> {
    size_guard("mcs", contexts, MAX_MCS_CONTEXTS)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prog = String::new();
    let mut tables = String::new();
    for i in 1..=contexts {
        let atoms: Vec<String> = (1..=MCS_ATOMS_PER_CONTEXT)
            .map(|k| format!("x{k}"))
            .collect();
        for a in &atoms {
            let _ = writeln!(prog, "b{i}({a}) | nb{i}({a}).");
        }
        let nbridge = if i == 1 { 0 } else { rng.gen_range(1..=2) };
        let mut bridges = Vec::new();
        for k in 1..=nbridge {
            let j = rng.gen_range(1..i);
            let src = &atoms[rng.gen_range(0..atoms.len())];
            let _ = writeln!(prog, "br{i}(y{k}) :- b{j}({src}).");
            bridges.push(format!("y{k}"));
        }
        let _ = writeln!(prog, ":- not &lc{i}[b{i},br{i}]().");
        let _ = writeln!(tables, "&lc{i} in=(1,1) out=0 monotonic=no");
        for bmask in 0u32..(1 << bridges.len()) {
            let nacc = rng.gen_range(1..=2);
            let mut accepted: Vec<u32> = (0..1u32 << atoms.len()).collect();
            accepted.shuffle(&mut rng);
            for &amask in &accepted[..nacc] {
                let mut guards = Vec::new();
                for (k, a) in atoms.iter().enumerate() {
                    let kw = if amask >> k & 1 == 1 { "has" } else { "hasnot" };
                    guards.push(format!("{kw} 1 ({a})"));
                }
                for (k, y) in bridges.iter().enumerate() {
                    let kw = if bmask >> k & 1 == 1 { "has" } else { "hasnot" };
                    guards.push(format!("{kw} 2 ({y})"));
                }
                let _ = writeln!(tables, "emit () if {}", guards.join(" and "));
            }
        }
    }
    Ok(Instance {
        program: prog,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            random_instance(5, RandomShape::default()),
            random_instance(5, RandomShape::default())
        );
        assert_eq!(generate_rs(2, 7).unwrap(), generate_rs(2, 7).unwrap());
        assert_eq!(generate_mcs(3, 1).unwrap(), generate_mcs(3, 1).unwrap());
    }

    #[test]
    fn random_instances_load() {
        for seed in 0..50 {
            let inst = random_instance(seed, RandomShape::default());
            let (p, _) = inst
                .load()
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}\n{}", inst.program, inst.tables));
            assert!(p.len() <= 6);
            assert!(p.rules.iter().flat_map(|r| r.externals()).count() <= 2);
        }
    }

    #[test]
    fn size_guards() {
        assert!(matches!(generate_rs(5, 0), Err(HexError::SizeTooLarge(_))));
        assert!(matches!(generate_mcs(0, 0), Err(HexError::SizeTooLarge(_))));
        generate_rs(4, 0).unwrap().load().unwrap();
        generate_mcs(4, 0).unwrap().load().unwrap();
    }
}
