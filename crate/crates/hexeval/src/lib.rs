//! Evaluation engine for HEX programs: answer set programs with external
//! atoms. Programs are grounded with value invention, decomposed into an
//! evaluation graph of units, and solved unit by unit, either in batch or as
//! a stream of answer sets.

pub mod deps;
pub mod evalgraph;
pub mod external;
pub mod generate;
pub mod grounding;
pub mod modelgraph;
pub mod parser;
pub mod pipeline;
pub mod solver;
pub mod syntax;

pub use external::{
    ConditionalTableOracle, ExternalPredicateDef, InputType, Oracle, OracleRegistry,
    ProjectedInput, TypeSignature,
};
pub use parser::{parse_program, Diagnostic, Severity};
pub use syntax::{
    Atom, BuiltinAtom, BuiltinOp, ExternalAtom, Interpretation, Literal, Program, Rule, RuleId,
    Sym, Term,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HexError {
    #[error("unknown external predicate &{0}")]
    UnknownExternalPredicate(String),
    #[error("arity mismatch for &{name}: {detail}")]
    ArityMismatch { name: String, detail: String },
    #[error("&{0} cannot enumerate its outputs")]
    InfiniteOutputGuard(String),
    #[error("line {line}: {message}")]
    TableParse { line: usize, message: String },
    #[error("conflicting signatures for &{0}")]
    SignatureConflict(String),
    #[error("universe too large: {pairs} subset pairs exceed the limit of {limit}")]
    UniverseTooLarge { pairs: u128, limit: u128 },
    #[error("unbound variable in {0}")]
    UnboundVariable(String),
    #[error("unsafe rule `{rule}`: variables {vars} are not safe")]
    UnsafeRule { rule: String, vars: String },
    #[error("grounding did not reach a fixpoint within {iterations} iterations")]
    GroundingDiverged { iterations: usize },
    #[error("too many atoms: {count} exceeds the limit of {limit}")]
    TooManyAtoms { count: usize, limit: usize },
    #[error("invalid evaluation graph: {0}")]
    InvalidEvaluationGraph(String),
    #[error("join undefined: {0}")]
    JoinUndefined(String),
    #[error("duplicate expanded interpretation at unit {0}")]
    DuplicateExpandedInterpretation(usize),
    #[error("answer set graph is not complete: {0}")]
    IncompleteGraph(String),
    #[error("parse error: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Parse(Vec<Diagnostic>),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("size too large: {0}")]
    SizeTooLarge(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = HexError> = std::result::Result<T, E>;
