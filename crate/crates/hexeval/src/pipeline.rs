//! End-to-end solving: build an evaluation graph with a heuristic, then
//! compute answer sets in batch or as a stream.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::deps::rule_dependencies;
use crate::evalgraph::{
    add_final_unit, drop_covered_constraints, heuristic_greedy, heuristic_monolithic,
    heuristic_trivial, push_shareable_constraints, EvaluationGraph,
};
use crate::external::OracleRegistry;
use crate::grounding::check_program_safety;
use crate::modelgraph::{
    build_answer_sets, AnswerSetGraph, AnswerSetStream, BuildOptions, RunStats,
};
use crate::syntax::{Interpretation, Program};
use crate::HexError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Heuristic {
    Monolithic,
    Trivial,
    #[default]
    Greedy,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Monolithic, Heuristic::Trivial, Heuristic::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Monolithic => "monolithic",
            Heuristic::Trivial => "trivial",
            Heuristic::Greedy => "greedy",
        }
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| {
                format!("unknown heuristic '{s}' (expected monolithic, trivial or greedy)")
            })
    }
}

/// Splits off the single ground facts, which are handed to every unit as
/// input.
pub fn split_edb(p: &Program) -> (Program, Interpretation) {
    let is_edb =
        |r: &crate::syntax::Rule| r.is_fact() && r.head.len() == 1 && r.head[0].is_ground();
    (
        Program::new(p.rules.iter().filter(|r| !is_edb(r)).cloned().collect()),
        p.edb(),
    )
}

/// The evaluation graph a heuristic builds for `p`, without the final unit.
/// Units cover the rules of `p` other than its single ground facts, which
/// form the graph's EDB. With sharing, constraints are copied into the
/// units that define what they depend on, and dropped from their own unit
/// where a copy covers all of those rules.
pub fn build_evaluation_graph(
    p: &Program,
    reg: &OracleRegistry,
    heuristic: Heuristic,
    share_constraints: bool,
) -> Result<EvaluationGraph, HexError> {
    let (idb, edb) = split_edb(p);
    let deps = rule_dependencies(&idb, reg)?;
    let mut e = match heuristic {
        Heuristic::Monolithic => heuristic_monolithic(&idb),
        Heuristic::Trivial => heuristic_trivial(&idb, &deps),
        Heuristic::Greedy => heuristic_greedy(&idb, &deps),
    };
    if share_constraints {
        e = drop_covered_constraints(&e, &push_shareable_constraints(&e, &deps), &deps);
    }
    e.edb = edb;
    Ok(e)
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub heuristic: Heuristic,
    pub share_constraints: bool,
    pub stream: bool,
    /// Stop after this many answer sets.
    pub limit: Option<usize>,
    /// Keep the answer set graph of a streaming run.
    pub retain_graph: bool,
    pub build: BuildOptions,
}

pub struct SolveOutcome {
    pub answer_sets: Vec<Interpretation>,
    pub graph: EvaluationGraph,
    /// The answer set graph of a batch run, or of a streaming run with
    /// `retain_graph`.
    pub models: Option<AnswerSetGraph>,
    pub stats: RunStats,
}

/// Answer sets of `p`. Batch runs return them in canonical order; streams
/// return them in the order found.
pub fn solve(
    p: &Program,
    reg: &OracleRegistry,
    opts: &SolveOptions,
) -> Result<SolveOutcome, HexError> {
    check_program_safety(p, reg)?;
    let graph = add_final_unit(&build_evaluation_graph(
        p,
        reg,
        opts.heuristic,
        opts.share_constraints,
    )?);
    let calls = reg.oracle_calls();
    if opts.stream {
        let start = std::time::Instant::now();
        let mut stream =
            AnswerSetStream::new(&graph, reg)?.with_max_ground_iter(opts.build.max_ground_iter);
        if opts.retain_graph {
            stream = stream.retaining_graph();
        }
        let mut answer_sets = Vec::new();
        while opts.limit.is_none_or(|n| answer_sets.len() < n) {
            match stream.next() {
                Some(i) => answer_sets.push(i?),
                None => break,
            }
        }
        let mut stats = stream.stats.clone();
        stats.oracle_calls = reg.oracle_calls() - calls;
        stats.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
        let models = stream.retained_graph().cloned();
        drop(stream);
        return Ok(SolveOutcome {
            answer_sets,
            graph,
            models,
            stats,
        });
    }
    let built = build_answer_sets(&graph, reg, opts.build)?;
    let mut answer_sets: Vec<Interpretation> = built
        .answer_sets
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if let Some(n) = opts.limit {
        answer_sets.truncate(n);
    }
    Ok(SolveOutcome {
        answer_sets,
        graph,
        models: Some(built.graph),
        stats: built.stats,
    })
}

/// One solver configuration measured by `compare_heuristics`.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub label: String,
    pub stats: RunStats,
}

/// Display name of a heuristic with or without constraint sharing.
pub fn config_label(heuristic: Heuristic, share_constraints: bool) -> String {
    if share_constraints {
        format!("{}+sharing", heuristic.name())
    } else {
        heuristic.name().to_string()
    }
}

/// Solves `p` with the monolithic, trivial and greedy-with-sharing graphs
/// and fails unless all three agree on the answer sets.
pub fn compare_heuristics(
    p: &Program,
    reg: &OracleRegistry,
) -> Result<(BTreeSet<Interpretation>, Vec<Comparison>), HexError> {
    compare_configurations(
        p,
        reg,
        &[
            (Heuristic::Monolithic, false),
            (Heuristic::Trivial, false),
            (Heuristic::Greedy, true),
        ],
    )
}

/// Solves `p` once per (heuristic, sharing) pair and fails unless all runs
/// agree with the first on the answer sets.
pub fn compare_configurations(
    p: &Program,
    reg: &OracleRegistry,
    configs: &[(Heuristic, bool)],
) -> Result<(BTreeSet<Interpretation>, Vec<Comparison>), HexError> {
    let mut reference: Option<BTreeSet<Interpretation>> = None;
    let mut out: Vec<Comparison> = Vec::new();
    for &(heuristic, share_constraints) in configs {
        let label = config_label(heuristic, share_constraints);
        let opts = SolveOptions {
            heuristic,
            share_constraints,
            ..Default::default()
        };
        let res = solve(p, reg, &opts)?;
        let sets: BTreeSet<Interpretation> = res.answer_sets.into_iter().collect();
        match &reference {
            None => reference = Some(sets),
            Some(r) if *r == sets => {}
            Some(_) => {
                return Err(HexError::ValidationFailed(format!(
                    "{label} disagrees with {}",
                    out[0].label
                )))
            }
        }
        out.push(Comparison {
            label,
            stats: res.stats,
        });
    }
    Ok((reference.unwrap_or_default(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn heuristic_names_round_trip() {
        for h in Heuristic::ALL {
            assert_eq!(h.name().parse::<Heuristic>().unwrap(), h);
        }
        assert!("best".parse::<Heuristic>().is_err());
    }

    #[test]
    fn batch_and_stream_agree_with_limit() {
        let p = parse_program("a | b. c :- a. d :- b, not c.").unwrap();
        let reg = OracleRegistry::with_builtins();
        let batch = solve(&p, &reg, &SolveOptions::default()).unwrap();
        assert_eq!(batch.answer_sets.len(), 2);
        let stream = solve(
            &p,
            &reg,
            &SolveOptions {
                stream: true,
                ..Default::default()
            },
        )
        .unwrap();
        let s: BTreeSet<_> = stream.answer_sets.into_iter().collect();
        assert_eq!(s, batch.answer_sets.iter().cloned().collect());
        let one = solve(
            &p,
            &reg,
            &SolveOptions {
                stream: true,
                limit: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.answer_sets.len(), 1);
    }

    #[test]
    fn comparison_reports_consistent_counters() {
        let p = parse_program("a | b. c :- a. :- c, b.").unwrap();
        let reg = OracleRegistry::with_builtins();
        let (sets, rows) = compare_heuristics(&p, &reg).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!(r.stats.joins_defined <= r.stats.joins_attempted);
        }
    }

    #[test]
    fn grounding_bound_applies_in_both_modes() {
        let p = parse_program("s(a). s(Y) :- s(X), &concat[X,x](Y).").unwrap();
        let reg = OracleRegistry::with_builtins();
        for stream in [false, true] {
            let build = BuildOptions {
                max_ground_iter: 5,
                ..Default::default()
            };
            let res = solve(
                &p,
                &reg,
                &SolveOptions {
                    stream,
                    build,
                    ..Default::default()
                },
            );
            assert!(
                matches!(res, Err(HexError::GroundingDiverged { iterations: 5 })),
                "stream={stream}"
            );
        }
    }

    #[test]
    fn retained_stream_graph_is_returned() {
        let p = parse_program("a | b.").unwrap();
        let reg = OracleRegistry::with_builtins();
        let res = solve(
            &p,
            &reg,
            &SolveOptions {
                stream: true,
                retain_graph: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.models.is_some_and(|a| !a.is_empty()));
    }
}
