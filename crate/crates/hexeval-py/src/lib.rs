//! Python module `hexeval_py`: parse, ground and solve HEX programs, and
//! inspect their dependency and evaluation graphs.

#![allow(clippy::useless_conversion)]

use std::path::PathBuf;

use hexeval::deps::rule_dependencies;
use hexeval::external::{load_table_oracles, parse_table_oracles};
use hexeval::grounding::{ground_fixpoint, DEFAULT_MAX_ITERATIONS};
use hexeval::modelgraph::BuildOptions;
use hexeval::pipeline::{build_evaluation_graph, Heuristic, SolveOptions};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(hexeval_py, HexevalError, PyException);
create_exception!(hexeval_py, ParseError, HexevalError);
create_exception!(hexeval_py, GroundingDiverged, HexevalError);

fn to_py(e: hexeval::HexError) -> PyErr {
    match e {
        hexeval::HexError::Parse(_) | hexeval::HexError::TableParse { .. } => {
            ParseError::new_err(e.to_string())
        }
        hexeval::HexError::GroundingDiverged { .. } => GroundingDiverged::new_err(e.to_string()),
        _ => HexevalError::new_err(e.to_string()),
    }
}

/// A parsed program.
#[pyclass(module = "hexeval_py", frozen)]
#[derive(Clone)]
pub struct Program {
    inner: hexeval::Program,
}

#[pymethods]
impl Program {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse(text)
    }

    /// Rules in program order, as source text.
    #[getter]
    fn rules(&self) -> Vec<String> {
        self.inner.rules.iter().map(|r| r.to_string()).collect()
    }

    fn is_ground(&self) -> bool {
        self.inner.is_ground()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("<Program with {} rules>", self.inner.len())
    }
}

/// External predicates available to a program: the built-ins plus any
/// registered table oracles.
#[pyclass(module = "hexeval_py")]
pub struct Registry {
    inner: hexeval::OracleRegistry,
}

#[pymethods]
impl Registry {
    #[new]
    fn new() -> Self {
        Registry {
            inner: hexeval::OracleRegistry::with_builtins(),
        }
    }

    /// Registers every table in a .etab file.
    fn load_tables(&mut self, path: PathBuf) -> PyResult<()> {
        for def in load_table_oracles(&path).map_err(to_py)? {
            self.inner.register(def).map_err(to_py)?;
        }
        Ok(())
    }

    /// Registers every table in .etab text.
    fn add_tables(&mut self, text: &str) -> PyResult<()> {
        for def in parse_table_oracles(text).map_err(to_py)? {
            self.inner.register(def).map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().map(|n| n.to_string()).collect()
    }

    #[getter]
    fn oracle_calls(&self) -> u64 {
        self.inner.oracle_calls()
    }
}

fn heuristic(name: &str) -> PyResult<Heuristic> {
    name.parse().map_err(PyValueError::new_err)
}

fn with_registry<T>(
    registry: Option<&Registry>,
    f: impl FnOnce(&hexeval::OracleRegistry) -> PyResult<T>,
) -> PyResult<T> {
    match registry {
        Some(r) => f(&r.inner),
        None => f(&hexeval::OracleRegistry::with_builtins()),
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Program> {
    Ok(Program {
        inner: hexeval::parse_program(text).map_err(to_py)?,
    })
}

/// Answer sets as lists of atoms in canonical order.
#[pyfunction]
#[pyo3(signature = (program, registry=None, heuristic="greedy", share_constraints=false, stream=false, limit=None))]
fn solve(
    program: &Program,
    registry: Option<&Registry>,
    heuristic: &str,
    share_constraints: bool,
    stream: bool,
    limit: Option<usize>,
) -> PyResult<Vec<Vec<String>>> {
    let opts = SolveOptions {
        heuristic: self::heuristic(heuristic)?,
        share_constraints,
        stream,
        limit,
        retain_graph: false,
        build: BuildOptions::default(),
    };
    with_registry(registry, |reg| {
        let res = hexeval::pipeline::solve(&program.inner, reg, &opts).map_err(to_py)?;
        Ok(res
            .answer_sets
            .iter()
            .map(|i| i.iter().map(|a| a.to_string()).collect())
            .collect())
    })
}

#[pyfunction]
#[pyo3(signature = (program, registry=None, max_iter=DEFAULT_MAX_ITERATIONS))]
fn ground(program: &Program, registry: Option<&Registry>, max_iter: usize) -> PyResult<Program> {
    with_registry(registry, |reg| {
        let rep = ground_fixpoint(&program.inner, reg, max_iter).map_err(to_py)?;
        Ok(Program { inner: rep.program })
    })
}

/// Rule dependency edges `(r, s, kind)`: rule r depends on rule s,
/// monotonically ("m") or not ("n").
#[pyfunction]
#[pyo3(signature = (program, registry=None))]
fn dependency_graph(
    program: &Program,
    registry: Option<&Registry>,
) -> PyResult<Vec<(usize, usize, &'static str)>> {
    with_registry(registry, |reg| {
        let g = rule_dependencies(&program.inner, reg).map_err(to_py)?;
        Ok(g.edges.iter().map(|&(r, s, k)| (r, s, k.label())).collect())
    })
}

type UnitGraph = (Vec<Vec<usize>>, Vec<(usize, usize)>);

/// Units as lists of rule indices and edges `(u, v)` meaning u depends on
/// v. Single ground facts are inputs to every unit and belong to none.
#[pyfunction]
#[pyo3(signature = (program, registry=None, heuristic="greedy", share_constraints=false))]
fn evaluation_graph(
    program: &Program,
    registry: Option<&Registry>,
    heuristic: &str,
    share_constraints: bool,
) -> PyResult<UnitGraph> {
    let h = self::heuristic(heuristic)?;
    with_registry(registry, |reg| {
        let e = build_evaluation_graph(&program.inner, reg, h, share_constraints).map_err(to_py)?;
        let units = e
            .units
            .iter()
            .map(|u| u.iter().copied().collect())
            .collect();
        Ok((units, e.edges.iter().copied().collect()))
    })
}

/// A benchmark instance as `(program text, table text)`.
#[pyfunction]
#[pyo3(signature = (kind, size, seed=0))]
fn generate(kind: &str, size: usize, seed: u64) -> PyResult<(String, String)> {
    let inst = match kind {
        "rs" => hexeval::generate::generate_rs(size, seed),
        "mcs" => hexeval::generate::generate_mcs(size, seed),
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown instance kind '{kind}' (expected rs or mcs)"
            )))
        }
    }
    .map_err(to_py)?;
    Ok((inst.program, inst.tables))
}

#[pymodule]
fn hexeval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_class::<Registry>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(ground, m)?)?;
    m.add_function(wrap_pyfunction!(dependency_graph, m)?)?;
    m.add_function(wrap_pyfunction!(evaluation_graph, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("HexevalError", m.py().get_type_bound::<HexevalError>())?;
    m.add("ParseError", m.py().get_type_bound::<ParseError>())?;
    m.add(
        "GroundingDiverged",
        m.py().get_type_bound::<GroundingDiverged>(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn module(py: Python<'_>) -> Bound<'_, PyModule> {
        let m = PyModule::new_bound(py, "hexeval_py").unwrap();
        hexeval_py(&m).unwrap();
        m
    }

    #[test]
    fn solve_from_python() {
        Python::with_gil(|py| {
            let m = module(py);
            let p = m
                .getattr("parse")
                .unwrap()
                .call1(("a | b. c :- a.",))
                .unwrap();
            let sets: Vec<Vec<String>> = m
                .getattr("solve")
                .unwrap()
                .call1((p,))
                .unwrap()
                .extract()
                .unwrap();
            assert_eq!(
                sets,
                vec![vec!["a".to_string(), "c".into()], vec!["b".into()]]
            );
        });
    }

    #[test]
    fn errors_map_to_exception_classes() {
        Python::with_gil(|py| {
            let m = module(py);
            let err = m.getattr("parse").unwrap().call1(("p(a",)).unwrap_err();
            assert!(err.is_instance_of::<ParseError>(py));
            assert!(err.is_instance_of::<HexevalError>(py));
            let p = parse("s(a). s(Y) :- s(X), &concat[X,x](Y).").unwrap();
            let err = ground(&p, None, 3).err().unwrap();
            assert!(err.is_instance_of::<GroundingDiverged>(py));
            assert!(solve(&p, None, "best", false, false, None)
                .err()
                .unwrap()
                .is_instance_of::<PyValueError>(py));
        });
    }

    #[test]
    fn graphs_cover_the_program() {
        let p = parse("p(a). q(X) :- p(X). r(X) :- q(X), not s(X). s(b).").unwrap();
        let deps = dependency_graph(&p, None).unwrap();
        assert!(deps.contains(&(2, 1, "m")));
        let (units, edges) = evaluation_graph(&p, None, "trivial", false).unwrap();
        let covered: Vec<usize> = units.iter().flatten().copied().collect();
        assert_eq!(covered.len(), 2);
        assert_eq!(edges.len(), 1);
    }
}
