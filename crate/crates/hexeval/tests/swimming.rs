mod common;

use std::collections::BTreeSet;

use common::*;
use hexeval::deps::rule_dependencies;
use hexeval::evalgraph::{
    add_final_unit, check_closure_bottoms, compute_fai, validate_evaluation_graph,
};
use hexeval::modelgraph::{
    answer_sets_from_complete_graph, build_answer_sets, validate_answer_set_graph, AnswerSetGraph,
    AnswerSetStream, BuildOptions, VertexKind,
};
use hexeval::pipeline::{solve, Heuristic, SolveOptions};
use hexeval::solver::solve_monolithic;
use hexeval::{HexError, Interpretation};

#[test]
fn monolithic_solver_finds_the_single_answer_set() {
    let (p, reg) = pswim();
    let sets = solve_monolithic(&p, &reg).unwrap();
    let stripped: Vec<_> = sets.iter().map(without_locations).collect();
    assert_eq!(stripped, vec![pswim_answer()]);
}

#[test]
fn every_configuration_agrees() {
    let (p, reg) = pswim();
    for heuristic in Heuristic::ALL {
        for share_constraints in [false, true] {
            for stream in [false, true] {
                let opts = SolveOptions {
                    heuristic,
                    share_constraints,
                    stream,
                    ..Default::default()
                };
                let res = solve(&p, &reg, &opts).unwrap();
                let got: Vec<_> = res.answer_sets.iter().map(without_locations).collect();
                assert_eq!(got, vec![pswim_answer()], "{opts:?}");
            }
        }
    }
}

#[test]
fn hand_built_graphs_are_valid() {
    let (p, reg) = pswim();
    let deps = rule_dependencies(&p, &reg).unwrap();
    for e in [e1(&p), e2(&p)] {
        assert!(
            validate_evaluation_graph(&e, &deps).is_empty(),
            "{:?}",
            validate_evaluation_graph(&e, &deps)
        );
        for u in 0..e.num_units() {
            assert!(check_closure_bottoms(&e, &deps, u).is_empty());
        }
    }
    assert_eq!(compute_fai(&e2(&p), 3), [0].into());
    for u in 0..3 {
        assert!(compute_fai(&e2(&p), u).is_empty());
    }
}

fn interp(s: &str) -> Interpretation {
    parse_interpretation(s)
}

#[test]
fn model_building_trace_on_e2() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let built = build_answer_sets(
        &e,
        &reg,
        BuildOptions {
            validate_each_step: true,
            ..Default::default()
        },
    )
    .unwrap();
    let a = &built.graph;
    assert_eq!(a.len(), 16);
    let ints: Vec<Interpretation> = a
        .vertices
        .iter()
        .map(|v| without_locations(&v.int))
        .collect();
    let expect = [
        (0, VertexKind::Input, "{}"),
        (0, VertexKind::Output, "{swim(ind)}"),
        (0, VertexKind::Output, "{swim(outd)}"),
        (1, VertexKind::Input, "{swim(ind)}"),
        (1, VertexKind::Input, "{swim(outd)}"),
        (1, VertexKind::Output, "{}"),
        (2, VertexKind::Input, "{swim(ind)}"),
        (2, VertexKind::Input, "{swim(outd)}"),
        (2, VertexKind::Output, "{go, goto(amalB), ngoto(margB)}"),
        (2, VertexKind::Output, "{go, goto(margB), ngoto(amalB)}"),
        (2, VertexKind::Output, "{go, goto(altD), ngoto(gansD)}"),
        (2, VertexKind::Output, "{go, goto(gansD), ngoto(altD)}"),
        (3, VertexKind::Input, "{go, goto(altD), ngoto(gansD)}"),
        (3, VertexKind::Input, "{go, goto(gansD), ngoto(altD)}"),
        (3, VertexKind::Output, "{need(loc,yogamat)}"),
    ];
    for (k, (unit, kind, int)) in expect.iter().enumerate() {
        assert_eq!(a.vertices[k].unit, *unit, "m{}", k + 1);
        assert_eq!(a.vertices[k].kind, *kind, "m{}", k + 1);
        assert_eq!(ints[k], interp(int), "m{}", k + 1);
    }
    assert_eq!(a.vertices[14].succ, vec![12]);
    assert_eq!(a.vertices[12].succ, vec![5, 10]);
    assert_eq!(without_locations(&a.vertices[15].int), pswim_answer());
    assert!(validate_answer_set_graph(a, &e, &reg, true)
        .unwrap()
        .is_empty());
}

#[test]
fn joins_at_the_unit_with_two_predecessors() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let a = build_answer_sets(&e, &reg, BuildOptions::default())
        .unwrap()
        .graph;
    // Vertex k is m(k+1).
    assert!(a.join(3, &[5, 8]).unwrap().is_none());
    assert!(a.join(3, &[5, 9]).unwrap().is_none());
    let j = a.join(3, &[5, 10]).unwrap().unwrap();
    assert_eq!(j, a.vertices[5].int.union(&a.vertices[10].int));
    assert!(a.join(3, &[5, 11]).unwrap().is_some());
    assert!(a
        .join(0, &[])
        .is_ok_and(|j| j == Some(Interpretation::new())));
}

#[test]
fn invalid_extensions_are_rejected() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let mut a = build_answer_sets(&e, &reg, BuildOptions::default())
        .unwrap()
        .graph;
    assert!(matches!(
        a.add_i_interpretation(3, &[5, 8]),
        Err(HexError::JoinUndefined(_))
    ));
    let m15 = a.vertices[14].clone();
    assert!(matches!(
        a.add_o_interpretation(3, 12, m15.int),
        Err(HexError::DuplicateExpandedInterpretation(3))
    ));
    assert!(AnswerSetGraph::new(&e).is_empty());
    assert!(
        validate_answer_set_graph(&AnswerSetGraph::new(&e), &e, &reg, true)
            .unwrap()
            .is_empty()
    );
}

#[test]
fn assembling_from_the_complete_graph() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let a = build_answer_sets(&e, &reg, BuildOptions::default())
        .unwrap()
        .graph;
    let sets: Vec<_> = answer_sets_from_complete_graph(&a, &e)
        .unwrap()
        .iter()
        .map(without_locations)
        .collect();
    assert_eq!(sets, vec![pswim_answer()]);
    assert!(matches!(
        answer_sets_from_complete_graph(&AnswerSetGraph::new(&e), &e),
        Err(HexError::IncompleteGraph(_))
    ));
}

#[test]
fn stream_yields_once_then_stays_done() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let mut s = AnswerSetStream::new(&e, &reg).unwrap();
    assert_eq!(
        without_locations(&s.next().unwrap().unwrap()),
        pswim_answer()
    );
    assert!(s.next().is_none());
    assert!(s.next().is_none());
    assert!(s.counters.max_per_unit() <= 1);
}

#[test]
fn retained_stream_graph_is_an_answer_set_graph() {
    let (p, reg) = pswim();
    let e = add_final_unit(&e2(&p));
    let mut s = AnswerSetStream::new(&e, &reg).unwrap().retaining_graph();
    let got: BTreeSet<_> = s.by_ref().map(|i| i.unwrap()).collect();
    assert_eq!(got.len(), 1);
    let a = s.retained_graph().unwrap();
    assert!(validate_answer_set_graph(a, &e, &reg, true)
        .unwrap()
        .is_empty());
}

#[test]
fn unsatisfiable_variant_has_no_answer_sets() {
    let (mut p, reg) = pswim();
    p.rules.push(
        hexeval::parse_program(":- swim(outd).")
            .unwrap()
            .rules
            .remove(0),
    );
    for heuristic in Heuristic::ALL {
        let res = solve(
            &p,
            &reg,
            &SolveOptions {
                heuristic,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.answer_sets.is_empty());
    }
    assert!(hexeval::solver::enumerate_answer_sets_bruteforce(
        &hexeval::grounding::ground_hex(&p, &reg).unwrap(),
        &reg
    )
    .unwrap()
    .is_empty());
}
