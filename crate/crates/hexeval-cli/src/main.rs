use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hexeval::deps::{atom_dependencies, dependencies_to_dot, rule_dependencies};
use hexeval::external::load_table_oracles;
use hexeval::generate::{generate_mcs, generate_rs};
use hexeval::grounding::{check_program_safety, ground_fixpoint, DEFAULT_MAX_ITERATIONS};
use hexeval::modelgraph::{BuildOptions, RunStats};
use hexeval::parser::parse_with_diagnostics;
use hexeval::pipeline::{
    build_evaluation_graph, compare_heuristics, solve, Heuristic, SolveOptions,
};
use hexeval::{HexError, OracleRegistry, Program};

#[derive(Parser)]
#[command(
    name = "hexeval",
    version,
    about = "Evaluate HEX programs with external atoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the answer sets of a program, one per line.
    Solve(SolveArgs),
    /// Write a benchmark instance as a .hex and .etab file pair.
    Gen(GenArgs),
    /// Solve with every heuristic and print their counters.
    Compare(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Program files; `-` reads standard input.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Table oracle files (.etab).
    #[arg(long = "oracle", num_args = 1..)]
    oracles: Vec<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "greedy")]
    heuristic: Heuristic,
    #[arg(long)]
    share_constraints: bool,
    /// Enumerate answer sets one at a time instead of building the whole
    /// answer set graph.
    #[arg(long)]
    stream: bool,
    /// Stop after this many answer sets.
    #[arg(short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
    limit: Option<u64>,
    /// Print the ground program and stop.
    #[arg(long)]
    ground_only: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_ground_iter: usize,
    /// Write the rule and atom dependency graphs as DOT.
    #[arg(long, value_name = "FILE")]
    dot_deps: Option<PathBuf>,
    /// Write the evaluation graph as DOT.
    #[arg(long, value_name = "FILE")]
    dot_eval: Option<PathBuf>,
    /// Write the answer set graph as DOT.
    #[arg(long, value_name = "FILE")]
    trace_model_graph: Option<PathBuf>,
    /// Print run counters to stderr.
    #[arg(long)]
    stats: bool,
    /// Recorded in the statistics; solving is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rs,
    Mcs,
}

#[derive(Args)]
struct GenArgs {
    kind: Kind,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HexError> for Failure {
    fn from(e: HexError) -> Self {
        let code = match e {
            HexError::Parse(_)
            | HexError::TableParse { .. }
            | HexError::SignatureConflict(_)
            | HexError::SizeTooLarge(_) => 2,
            HexError::GroundingDiverged { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| io_failure(path, e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn load(input: &InputArgs) -> Result<(Program, OracleRegistry), Failure> {
    let mut rules = Vec::new();
    for path in &input.files {
        match parse_with_diagnostics(&read_input(path)?) {
            Ok((p, warnings)) => {
                for w in warnings {
                    eprintln!("{}:{w}", path.display());
                }
                rules.extend(p.rules);
            }
            Err(diags) => {
                for d in diags {
                    eprintln!("{}:{d}", path.display());
                }
                return Err(Failure {
                    code: 2,
                    message: format!("could not parse {}", path.display()),
                });
            }
        }
    }
    let mut reg = OracleRegistry::with_builtins();
    for path in &input.oracles {
        let defs = load_table_oracles(path).map_err(|e| {
            let f = Failure::from(e);
            Failure {
                message: format!("{}: {}", path.display(), f.message),
                ..f
            }
        })?;
        for def in defs {
            reg.register(def)?;
        }
    }
    Ok((Program::new(rules), reg))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn print_stats(stats: &RunStats, seed: Option<u64>) {
    eprintln!("units: {}", stats.units);
    eprintln!("evaluations per unit: {:?}", stats.evaluations_per_unit);
    eprintln!("joins attempted: {}", stats.joins_attempted);
    eprintln!("joins defined: {}", stats.joins_defined);
    eprintln!("ground rules: {}", stats.ground_rules);
    eprintln!("candidates: {}", stats.solver.candidates);
    eprintln!("reduct checks: {}", stats.solver.reduct_checks);
    eprintln!("oracle calls: {}", stats.oracle_calls);
    eprintln!("wall time ms: {:.3}", stats.wall_time_ms);
    if let Some(s) = seed {
        eprintln!("seed: {s}");
    }
}

fn run_solve(args: &SolveArgs) -> Result<(), Failure> {
    let (p, reg) = load(&args.input)?;
    for w in check_program_safety(&p, &reg)? {
        eprintln!("warning: rule {}: {}", w.rule + 1, w.message);
    }
    if let Some(path) = &args.dot_deps {
        let rules = rule_dependencies(&p, &reg)?;
        let atoms = atom_dependencies(&p, &reg)?;
        write_file(path, &dependencies_to_dot(&p, &rules, &atoms))?;
    }
    let mut out = std::io::stdout().lock();
    if args.ground_only {
        let rep = ground_fixpoint(&p, &reg, args.max_ground_iter)?;
        write!(out, "{}", rep.program).map_err(|e| io_failure(Path::new("stdout"), e))?;
        return Ok(());
    }
    if let Some(path) = &args.dot_eval {
        let e = build_evaluation_graph(&p, &reg, args.heuristic, args.share_constraints)?;
        write_file(path, &e.to_dot())?;
    }
    let opts = SolveOptions {
        heuristic: args.heuristic,
        share_constraints: args.share_constraints,
        stream: args.stream,
        limit: args.limit.map(|n| n as usize),
        retain_graph: args.trace_model_graph.is_some(),
        build: BuildOptions {
            max_ground_iter: args.max_ground_iter,
            ..BuildOptions::from_env()
        },
    };
    let res = solve(&p, &reg, &opts)?;
    for i in &res.answer_sets {
        writeln!(out, "{i}").map_err(|e| io_failure(Path::new("stdout"), e))?;
    }
    if let (Some(path), Some(a)) = (&args.trace_model_graph, &res.models) {
        write_file(path, &a.to_dot())?;
    }
    if args.stats {
        print_stats(&res.stats, args.seed);
    }
    Ok(())
}

fn run_gen(args: &GenArgs) -> Result<(), Failure> {
    let (inst, kind) = match args.kind {
        Kind::Rs => (generate_rs(args.size, args.seed)?, "rs"),
        Kind::Mcs => (generate_mcs(args.size, args.seed)?, "mcs"),
    };
    let (hex, etab) = inst.write_to(&args.out, &format!("{kind}_{}_{}", args.size, args.seed))?;
    println!("{}", hex.display());
    println!("{}", etab.display());
    Ok(())
}

fn run_compare(input: &InputArgs) -> Result<(), Failure> {
    let (p, reg) = load(input)?;
    let (sets, rows) = compare_heuristics(&p, &reg)?;
    println!("answer sets: {}", sets.len());
    println!(
        "{:<18} {:>6} {:>10} {:>10} {:>12} {:>10}",
        "config", "units", "joins", "defined", "candidates", "ms"
    );
    for r in rows {
        let s = &r.stats;
        println!(
            "{:<18} {:>6} {:>10} {:>10} {:>12} {:>10.2}",
            r.label,
            s.units,
            s.joins_attempted,
            s.joins_defined,
            s.solver.candidates,
            s.wall_time_ms
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Gen(a) => run_gen(a),
        Command::Compare(a) => run_compare(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
