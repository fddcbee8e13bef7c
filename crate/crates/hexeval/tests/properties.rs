use std::collections::BTreeSet;

use hexeval::deps::{rule_dependencies, DepKind};
use hexeval::evalgraph::{add_final_unit, validate_evaluation_graph};
use hexeval::generate::{generate_mcs, generate_rs, random_instance, RandomShape};
use hexeval::grounding::ground_hex;
use hexeval::modelgraph::AnswerSetStream;
use hexeval::pipeline::{build_evaluation_graph, solve, Heuristic, SolveOptions};
use hexeval::solver::{enumerate_answer_sets_bruteforce, evaluate_ground_hex};
use hexeval::syntax::all_substitutions;
use hexeval::{parse_program, Atom, HexError, Interpretation, Literal, Program, Sym, Term};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = RandomShape> {
    (1usize..=6, 1usize..=3, 0usize..=2).prop_map(|(max_rules, constants, max_externals)| {
        RandomShape {
            max_rules,
            constants,
            max_externals,
        }
    })
}

fn rename(a: &Atom, suffix: &str) -> Atom {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Term::var(&format!("{v}{suffix}")),
            c => c.clone(),
        })
        .collect();
    Atom {
        predicate: a.predicate.clone(),
        args,
    }
}

/// Unifiability by search: rename apart, then try every assignment into the
/// program constants plus one fresh constant per variable.
fn unifiable_by_search(a: &Atom, b: &Atom, consts: &BTreeSet<Sym>) -> bool {
    let (a, b) = (rename(a, "_1"), rename(b, "_2"));
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return false;
    }
    let vars: BTreeSet<Sym> = a.vars().chain(b.vars()).cloned().collect();
    let mut pool: Vec<Sym> = consts.iter().cloned().collect();
    pool.extend((0..vars.len()).map(|i| Sym::new(&format!("fresh{i}"))));
    all_substitutions(&vars, &pool)
        .iter()
        .any(|t| a.apply(t) == b.apply(t))
}

fn ordinary(ls: &[Literal]) -> impl Iterator<Item = &Atom> {
    ls.iter().filter_map(|l| l.as_ordinary())
}

fn expected_edges(p: &Program) -> BTreeSet<(usize, usize, DepKind)> {
    let consts = p.constants();
    let mut out = BTreeSet::new();
    for (ri, r) in p.rules.iter().enumerate() {
        for (si, s) in p.rules.iter().enumerate() {
            if ri == si {
                continue;
            }
            for h in &s.head {
                if ordinary(&r.pos).any(|a| unifiable_by_search(a, h, &consts)) {
                    out.insert((ri, si, DepKind::Monotonic));
                }
                if ordinary(&r.neg).any(|a| unifiable_by_search(a, h, &consts)) {
                    out.insert((ri, si, DepKind::Nonmonotonic));
                }
                if r.head.iter().any(|a| unifiable_by_search(a, h, &consts)) {
                    out.insert((ri, si, DepKind::Monotonic));
                    out.insert((si, ri, DepKind::Monotonic));
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>(), shape in shape()) {
        let inst = random_instance(seed, shape);
        let p = parse_program(&inst.program).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        prop_assert_eq!(p, again);
    }

    #[test]
    fn rule_dependencies_match_unification_search(seed in any::<u64>(), rules in 1usize..=6) {
        let inst = random_instance(seed, RandomShape { max_rules: rules, constants: 3, max_externals: 0 });
        let (p, reg) = inst.load().unwrap();
        let deps = rule_dependencies(&p, &reg).unwrap();
        prop_assert_eq!(deps.edges, expected_edges(&p));
    }

    #[test]
    fn solver_matches_brute_force(seed in any::<u64>(), shape in shape()) {
        let (p, reg) = random_instance(seed, shape).load().unwrap();
        let g = ground_hex(&p, &reg).unwrap();
        match enumerate_answer_sets_bruteforce(&g, &reg) {
            Ok(expected) => prop_assert_eq!(evaluate_ground_hex(&g, &reg).unwrap().0, expected),
            Err(HexError::TooManyAtoms { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn every_heuristic_yields_a_valid_graph(seed in any::<u64>(), shape in shape(), share in any::<bool>()) {
        let (p, reg) = random_instance(seed, shape).load().unwrap();
        for h in Heuristic::ALL {
            let e = build_evaluation_graph(&p, &reg, h, share).unwrap();
            let deps = rule_dependencies(&e.program, &reg).unwrap();
            let v = validate_evaluation_graph(&e, &deps);
            prop_assert!(v.is_empty(), "{:?} {:?}", h, v);
        }
    }

    #[test]
    fn streaming_matches_batch(seed in any::<u64>(), shape in shape(), h in 0usize..3) {
        let (p, reg) = random_instance(seed, shape).load().unwrap();
        let heuristic = Heuristic::ALL[h];
        let batch: BTreeSet<Interpretation> =
            solve(&p, &reg, &SolveOptions { heuristic, ..Default::default() }).unwrap().answer_sets.into_iter().collect();
        let e = add_final_unit(&build_evaluation_graph(&p, &reg, heuristic, false).unwrap());
        let mut stream = AnswerSetStream::new(&e, &reg).unwrap();
        let mut streamed = Vec::new();
        for i in stream.by_ref() {
            streamed.push(i.unwrap());
        }
        prop_assert!(stream.counters.max_per_unit() <= 1);
        let distinct: BTreeSet<Interpretation> = streamed.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), streamed.len());
        prop_assert_eq!(distinct, batch);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), size in 1usize..=4) {
        prop_assert_eq!(generate_rs(size, seed).unwrap(), generate_rs(size, seed).unwrap());
        prop_assert_eq!(generate_mcs(size, seed).unwrap(), generate_mcs(size, seed).unwrap());
        prop_assert_eq!(random_instance(seed, RandomShape::default()), random_instance(seed, RandomShape::default()));
    }
}

#[test]
fn generated_benchmarks_have_answer_sets() {
    for seed in 0..3 {
        for inst in [
            generate_rs(1, seed).unwrap(),
            generate_mcs(2, seed).unwrap(),
        ] {
            let (p, reg) = inst.load().unwrap();
            assert!(!solve(&p, &reg, &SolveOptions::default())
                .unwrap()
                .answer_sets
                .is_empty());
        }
    }
}
