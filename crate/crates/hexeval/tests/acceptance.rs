//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use hexeval::deps::{is_generalized_bottom, is_rule_splitting_set, rule_dependencies};
use hexeval::evalgraph::{
    add_final_unit, check_closure_bottoms, check_disjoint_heads, compute_fai,
    validate_evaluation_graph,
};
use hexeval::generate::{generate_mcs, generate_rs, random_instance, Instance, RandomShape};
use hexeval::grounding::{ground_fixpoint, ground_hex, DEFAULT_MAX_ITERATIONS};
use hexeval::modelgraph::{build_answer_sets, AnswerSetStream, BuildOptions};
use hexeval::pipeline::{
    build_evaluation_graph, compare_configurations, solve, Heuristic, SolveOptions,
};
use hexeval::solver::{
    check_answer_set, enumerate_answer_sets_bruteforce, evaluate_ground_hex, solve_monolithic,
};
use hexeval::syntax::facts_of;
use hexeval::{parse_program, HexError, Interpretation, OracleRegistry, Program, RuleId};

type Outcome = Result<String, String>;

fn run(n: usize, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = f();
    let took = start.elapsed();
    let (ok, detail) = match res {
        Ok(d) if took <= limit => (true, d),
        Ok(d) => (false, format!("{d}; took {took:.2?}, limit {limit:?}")),
        Err(e) => (false, e),
    };
    println!(
        "{} {n}. {title}: {detail} [{took:.2?}]",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: HexError) -> String {
    e.to_string()
}

fn pswim_end_to_end() -> Outcome {
    let (p, reg) = pswim();
    let mut runs = 0;
    for heuristic in Heuristic::ALL {
        for share_constraints in [false, true] {
            for stream in [false, true] {
                let opts = SolveOptions {
                    heuristic,
                    share_constraints,
                    stream,
                    ..Default::default()
                };
                let res = solve(&p, &reg, &opts).map_err(err)?;
                let got: Vec<_> = res.answer_sets.iter().map(without_locations).collect();
                check(got == vec![pswim_answer()], || {
                    format!("{opts:?} gave {got:?}")
                })?;
                runs += 1;
            }
        }
    }
    Ok(format!("{} in all {runs} configurations", pswim_answer()))
}

fn flp_semantics() -> Outcome {
    let p = read_program("flp.hex");
    let reg = OracleRegistry::with_builtins();
    let sets = solve_monolithic(&p, &reg).map_err(err)?;
    check(sets.is_empty(), || {
        format!("expected no answer sets, got {sets:?}")
    })?;
    let g = ground_hex(&p, &reg).map_err(err)?;
    for cand in ["{p(a)}", "{p(a), f}", "{}", "{f}"] {
        let i = parse_interpretation(cand);
        check(!check_answer_set(&g, &i, &reg).map_err(err)?, || {
            format!("{cand} accepted")
        })?;
    }
    Ok("no answer sets; I1..I4 all rejected".into())
}

fn grounding_fixpoint() -> Outcome {
    let p = read_program("concat.hex");
    let reg = OracleRegistry::with_builtins();
    let report = ground_fixpoint(&p, &reg, DEFAULT_MAX_ITERATIONS).map_err(err)?;
    let expected = parse_program(
        "s(a). dom(ax). dom(axx).
         s(ax) :- s(a), &concat[a,x](ax), dom(ax).
         s(axx) :- s(ax), &concat[ax,x](axx), dom(axx).",
    )
    .map_err(err)?;
    let got: BTreeSet<String> = report.program.rules.iter().map(|r| r.to_string()).collect();
    let want: BTreeSet<String> = expected.rules.iter().map(|r| r.to_string()).collect();
    check(got == want, || format!("got {got:?}"))?;
    check(report.iterations == 2, || {
        format!("{} iterations", report.iterations)
    })?;
    Ok(format!(
        "{} rules in {} iterations",
        got.len(),
        report.iterations
    ))
}

fn subsets(ids: &[RuleId]) -> impl Iterator<Item = BTreeSet<RuleId>> + '_ {
    (0u32..1 << ids.len()).map(move |m| {
        ids.iter()
            .enumerate()
            .filter(|(k, _)| m >> k & 1 == 1)
            .map(|(_, r)| *r)
            .collect()
    })
}

fn answer_sets(p: &Program, reg: &OracleRegistry) -> Result<BTreeSet<Interpretation>, HexError> {
    solve_monolithic(p, reg)
}

fn splitting_theorems() -> Outcome {
    let (mut programs, mut pairs) = (0, 0);
    for seed in 0..200 {
        let inst = random_instance(seed, RandomShape::default());
        let (p, reg) = inst.load().map_err(err)?;
        let truth = enumerate_answer_sets_bruteforce(&ground_hex(&p, &reg).map_err(err)?, &reg)
            .map_err(err)?;
        let deps = rule_dependencies(&p, &reg).map_err(err)?;
        let ids: Vec<RuleId> = (0..p.len()).collect();
        let all: BTreeSet<RuleId> = ids.iter().copied().collect();
        for r in subsets(&ids).filter(|r| is_rule_splitting_set(&deps, &all, r)) {
            for b in subsets(&ids).filter(|b| is_generalized_bottom(&p, &deps, &all, &r, b)) {
                let rest: Vec<RuleId> = all.difference(&r).copied().collect();
                let mut got = BTreeSet::new();
                for x in answer_sets(&p.subprogram(&b), &reg).map_err(err)? {
                    let mut top = p.subprogram(&rest);
                    top.rules.extend(facts_of(&x).rules);
                    got.extend(answer_sets(&top, &reg).map_err(err)?);
                }
                check(got == truth, || {
                    format!(
                        "seed {seed}, R={r:?}, B={b:?}: {got:?} vs {truth:?}\n{}",
                        inst.program
                    )
                })?;
                pairs += 1;
            }
        }
        programs += 1;
    }
    Ok(format!(
        "{programs} programs, {pairs} (R, B) pairs, 0 counterexamples"
    ))
}

fn join_fixture() -> Outcome {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    check(compute_fai(&e, 3) == [0].into(), || {
        format!("fai(u4) = {:?}", compute_fai(&e, 3))
    })?;
    let built = build_answer_sets(&e, &reg, BuildOptions::default()).map_err(err)?;
    let a = &built.graph;
    // Vertex k is m(k+1): m6 = 5, m9..m12 = 8..11.
    for (other, defined) in [(8, false), (9, false), (10, true), (11, true)] {
        let j = a.join(3, &[5, other]).map_err(err)?;
        check(j.is_some() == defined, || {
            format!("m6 join m{} defined = {}", other + 1, j.is_some())
        })?;
    }
    let expected = [
        "{}",
        "{swim(ind)}",
        "{swim(outd)}",
        "{swim(ind)}",
        "{swim(outd)}",
        "{}",
        "{swim(ind)}",
        "{swim(outd)}",
        "{go, goto(amalB), ngoto(margB)}",
        "{go, goto(margB), ngoto(amalB)}",
        "{go, goto(altD), ngoto(gansD)}",
        "{go, goto(gansD), ngoto(altD)}",
        "{go, goto(altD), ngoto(gansD)}",
        "{go, goto(gansD), ngoto(altD)}",
        "{need(loc,yogamat)}",
    ];
    let got: Vec<Interpretation> = a
        .vertices
        .iter()
        .take(15)
        .map(|v| without_locations(&v.int))
        .collect();
    let want: Vec<Interpretation> = expected.iter().map(|s| parse_interpretation(s)).collect();
    check(got == want, || format!("contents differ: {got:?}"))?;
    check(a.len() == 16, || format!("{} vertices", a.len()))?;
    Ok("fai(u4) = {u1}; joins as expected; m1..m15 reproduced".into())
}

fn solver_equivalence() -> Outcome {
    let (mut compared, mut skipped, mut seed) = (0, 0, 10_000u64);
    while compared < 500 {
        let (p, reg) = random_instance(seed, RandomShape::default())
            .load()
            .map_err(err)?;
        seed += 1;
        let g = match ground_hex(&p, &reg) {
            Ok(g) => g,
            Err(HexError::TooManyAtoms { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(format!("seed {}: {e}", seed - 1)),
        };
        let (fast, _) = evaluate_ground_hex(&g, &reg).map_err(err)?;
        let slow = enumerate_answer_sets_bruteforce(&g, &reg).map_err(err)?;
        check(fast == slow, || {
            format!("seed {}: {fast:?} vs {slow:?}\n{g}", seed - 1)
        })?;
        compared += 1;
    }
    Ok(format!(
        "{compared} ground programs agree ({skipped} over the guard skipped)"
    ))
}

fn streaming_instances() -> Vec<Instance> {
    let mut out: Vec<Instance> = (0..80)
        .map(|s| random_instance(20_000 + s, RandomShape::default()))
        .collect();
    for size in 1..=2 {
        for seed in 0..5 {
            out.push(generate_rs(size, seed).unwrap());
            out.push(generate_mcs(size + 1, seed).unwrap());
        }
    }
    out
}

fn streaming_equivalence() -> Outcome {
    let (mut instances, mut max_live) = (0, 0);
    for inst in streaming_instances() {
        let (p, reg) = inst.load().map_err(err)?;
        for heuristic in [Heuristic::Trivial, Heuristic::Greedy] {
            let e =
                add_final_unit(&build_evaluation_graph(&p, &reg, heuristic, true).map_err(err)?);
            let batch: BTreeSet<Interpretation> =
                build_answer_sets(&e, &reg, BuildOptions::default())
                    .map_err(err)?
                    .answer_sets
                    .into_iter()
                    .collect();
            let mut stream = AnswerSetStream::new(&e, &reg).map_err(err)?;
            let mut streamed = Vec::new();
            for i in stream.by_ref() {
                streamed.push(i.map_err(err)?);
            }
            let distinct: BTreeSet<Interpretation> = streamed.iter().cloned().collect();
            check(distinct.len() == streamed.len(), || {
                format!("duplicates in stream\n{}", inst.program)
            })?;
            check(distinct == batch, || {
                format!("stream differs from batch\n{}", inst.program)
            })?;
            max_live = max_live.max(stream.counters.max_per_unit());
            check(stream.counters.max_per_unit() <= 1, || {
                format!("live counter reached {}", stream.counters.max_per_unit())
            })?;
        }
        instances += 1;
    }
    Ok(format!(
        "{instances} instances, two graphs each; max live models per unit {max_live}"
    ))
}

fn validators() -> Outcome {
    let (mut graphs, mut instances) = (0, 0);
    for inst in streaming_instances() {
        let (p, reg) = inst.load().map_err(err)?;
        let consts = ground_hex(&p, &reg).map_err(err)?.term_constants();
        for heuristic in Heuristic::ALL {
            for share in [false, true] {
                let e = build_evaluation_graph(&p, &reg, heuristic, share).map_err(err)?;
                let deps = rule_dependencies(&e.program, &reg).map_err(err)?;
                let mut v = validate_evaluation_graph(&e, &deps);
                v.extend(check_disjoint_heads(&e, &consts));
                for u in 0..e.num_units() {
                    v.extend(check_closure_bottoms(&e, &deps, u));
                }
                check(v.is_empty(), || {
                    format!("{heuristic:?}/{share}: {v:?}\n{}", inst.program)
                })?;
                build_answer_sets(
                    &add_final_unit(&e),
                    &reg,
                    BuildOptions {
                        validate_each_step: true,
                        ..Default::default()
                    },
                )
                .map_err(err)?;
                graphs += 1;
            }
        }
        instances += 1;
    }
    Ok(format!(
        "{graphs} graphs over {instances} instances, 0 violations"
    ))
}

fn directional_performance() -> Outcome {
    let (mut total, mut better_or_equal) = (0, 0);
    for size in 1..=4 {
        for seed in 0..10 {
            let (p, reg) = generate_rs(size, seed).map_err(err)?.load().map_err(err)?;
            let configs = [(Heuristic::Monolithic, false), (Heuristic::Greedy, true)];
            let (_, rows) = compare_configurations(&p, &reg, &configs)
                .map_err(|e| format!("rs {size}/{seed}: {e}"))?;
            let mono = rows
                .iter()
                .find(|r| r.label == "monolithic")
                .expect("monolithic row");
            let greedy = rows
                .iter()
                .find(|r| r.label == "greedy+sharing")
                .expect("greedy row");
            if greedy.stats.solver.candidates <= mono.stats.solver.candidates {
                better_or_equal += 1;
            }
            total += 1;
        }
    }
    let share = better_or_equal as f64 / total as f64;
    check(share >= 0.8, || {
        format!("greedy+sharing <= monolithic on {better_or_equal}/{total}")
    })?;
    Ok(format!("greedy+sharing <= monolithic candidates on {better_or_equal}/{total}; answer sets identical on all"))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "swimming program end to end", s(1), pswim_end_to_end),
        run(2, "FLP semantics", s(1), flp_semantics),
        run(3, "grounding fixpoint", s(1), grounding_fixpoint),
        run(4, "splitting theorems", s(60), splitting_theorems),
        run(5, "join and FAI fixture", s(1), join_fixture),
        run(6, "solver vs brute force", s(120), solver_equivalence),
        run(
            7,
            "streaming equivalence and memory bound",
            s(60),
            streaming_equivalence,
        ),
        run(8, "validators as theorems", s(120), validators),
        run(
            9,
            "directional performance",
            s(120),
            directional_performance,
        ),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
