#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use hexeval::evalgraph::EvaluationGraph;
use hexeval::external::load_table_oracle;
use hexeval::{parse_program, Interpretation, OracleRegistry, Program, Sym};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_program(name: &str) -> Program {
    parse_program(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// The swimming program with its `&rq` oracle. Rules 0..=7 are r1..r5,
/// c6..c8; rules 8..=11 are the location facts.
pub fn pswim() -> (Program, OracleRegistry) {
    let mut reg = OracleRegistry::with_builtins();
    reg.register(load_table_oracle(&fixture("rq.etab")).unwrap())
        .unwrap();
    (read_program("pswim.hex"), reg)
}

pub const LOCATIONS: [usize; 4] = [8, 9, 10, 11];

pub fn pswim_answer() -> Interpretation {
    parse_interpretation("{swim(outd), goto(altD), ngoto(gansD), go, need(loc,yogamat)}")
}

/// Parses `{a, p(b,c)}` by reading the atoms back as facts.
pub fn parse_interpretation(s: &str) -> Interpretation {
    let inner = s
        .trim()
        .trim_start_matches('{')
        .trim_end_matches('}')
        .trim();
    if inner.is_empty() {
        return Interpretation::new();
    }
    let mut facts = String::new();
    let mut depth = 0;
    for c in inner.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                facts.push('.');
                continue;
            }
            _ => {}
        }
        facts.push(c);
    }
    facts.push('.');
    parse_program(&facts)
        .unwrap()
        .rules
        .iter()
        .map(|r| r.head[0].clone())
        .collect()
}

pub fn without_locations(i: &Interpretation) -> Interpretation {
    i.iter()
        .filter(|a| a.predicate != Sym::new("location"))
        .cloned()
        .collect()
}

fn units(sets: &[&[usize]]) -> Vec<BTreeSet<usize>> {
    sets.iter().map(|s| s.iter().copied().collect()).collect()
}

/// u1 = {r1}, u2 = {r2, c8}, u3 = {r3, r4, c6, c7} with the facts,
/// u4 = {r5, c8}.
pub fn e2(p: &Program) -> EvaluationGraph {
    EvaluationGraph::new(
        p.clone(),
        units(&[&[0], &[1, 7], &[2, 3, 5, 6, 8, 9, 10, 11], &[4, 7]]),
        [(1, 0), (2, 0), (3, 1), (3, 2)].into_iter().collect(),
    )
}

/// u1 = {r1, r3, r4, c6, c7} with the facts, u2 = {r2, r5}, u3 = {c8}.
pub fn e1(p: &Program) -> EvaluationGraph {
    EvaluationGraph::new(
        p.clone(),
        units(&[&[0, 2, 3, 5, 6, 8, 9, 10, 11], &[1, 4], &[7]]),
        [(1, 0), (2, 1)].into_iter().collect(),
    )
}
