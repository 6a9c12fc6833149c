//! Python bindings. Every function takes and returns JSON text in the same
//! formats the command-line tool reads and writes.

use convexpop::convexcert::{build_sdr, certify_convexity, CertStatus, CertifyOptions, SdrSource};
use convexpop::hierarchy::{solve_hierarchy, HierarchyOptions, PolyOptProblem};
use convexpop::moment::MomentVector;
use convexpop::polyalg::{Polynomial, SemialgebraicSet, Term};
use convexpop::sos::{is_sos_convex, jensen_check, sos_decompose, SosConvexity, SosOutcome};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::{Deserialize, Serialize};

/// `{n, objective, constraints, ball_bound?}`.
#[derive(Deserialize)]
struct ProblemJson {
    n: usize,
    objective: Vec<Term>,
    constraints: Vec<Vec<Term>>,
    #[serde(default)]
    ball_bound: Option<f64>,
}

#[derive(Serialize)]
struct SosReport {
    sos: &'static str,
    witness: Option<convexpop::sos::SosWitness>,
    detail: Option<String>,
    sos_convex: bool,
}

fn core_err(e: convexpop::Error) -> PyErr {
    match e {
        convexpop::Error::Solver(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn dump<T: Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn poly(n: usize, terms: &str) -> PyResult<Polynomial> {
    let t: Vec<Term> = parse(terms)?;
    Polynomial::from_term_list(n, &t).map_err(core_err)
}

fn certify_options(d_max: usize, start_order: Option<usize>, tol: Option<f64>, seed: Option<u64>) -> CertifyOptions {
    let mut o = CertifyOptions { d_max, start_order, ..CertifyOptions::default() };
    if let Some(t) = tol {
        o.tol = t;
    }
    if let Some(s) = seed {
        o.seed = s;
    }
    o
}

/// Runs the relaxation hierarchy and returns the report.
#[pyfunction]
#[pyo3(signature = (problem, r_max = 5, tol = None, tau = None))]
fn solve(py: Python<'_>, problem: &str, r_max: usize, tol: Option<f64>, tau: Option<f64>) -> PyResult<String> {
    let p: ProblemJson = parse(problem)?;
    let objective = Polynomial::from_term_list(p.n, &p.objective).map_err(core_err)?;
    let constraints = p
        .constraints
        .iter()
        .map(|c| Polynomial::from_term_list(p.n, c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core_err)?;
    let set = SemialgebraicSet::new(p.n, constraints, p.ball_bound).map_err(core_err)?;
    let problem = PolyOptProblem::new(objective, set).map_err(core_err)?;
    let mut opts = HierarchyOptions { r_max, ..HierarchyOptions::default() };
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(t) = tau {
        opts.tau = t;
    }
    let rep = py.detach(|| solve_hierarchy(&problem, &opts)).map_err(core_err)?;
    dump(&rep)
}

/// Certifies convexity of `{n, constraints, ball_bound?}`.
#[pyfunction]
#[pyo3(signature = (set, d_max = 4, start_order = None, tol = None, seed = None))]
fn certify(
    py: Python<'_>,
    set: &str,
    d_max: usize,
    start_order: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
) -> PyResult<String> {
    let set: SemialgebraicSet = parse(set)?;
    let opts = certify_options(d_max, start_order, tol, seed);
    let cert = py.detach(|| certify_convexity(&set, &opts)).map_err(core_err)?;
    dump(&cert)
}

/// Certifies, then builds the lift. Raises `ValueError` when certification
/// does not succeed.
#[pyfunction]
#[pyo3(signature = (set, d_max = 4, start_order = None))]
fn sdr(py: Python<'_>, set: &str, d_max: usize, start_order: Option<usize>) -> PyResult<String> {
    let set: SemialgebraicSet = parse(set)?;
    let opts = certify_options(d_max, start_order, None, None);
    let cert = py.detach(|| certify_convexity(&set, &opts)).map_err(core_err)?;
    if cert.status != CertStatus::CertifiedNumerically {
        return Err(PyValueError::new_err(format!("certification status is {}", cert.status)));
    }
    dump(&build_sdr(&set, SdrSource::Certificate(&cert)).map_err(core_err)?)
}

/// Checks `L_y(f) >= f(L_y(X))` for term list `f` and moment vector `y`.
#[pyfunction]
fn jensen(n: usize, f: &str, y: &str) -> PyResult<String> {
    let f = poly(n, f)?;
    let y: MomentVector = parse(y)?;
    dump(&jensen_check(&f, &y).map_err(core_err)?)
}

/// SOS and SOS-convexity verdicts for a term list.
#[pyfunction]
fn sos_check(n: usize, p: &str) -> PyResult<String> {
    let p = poly(n, p)?;
    let (sos, witness, detail) = if p.degree() % 2 == 1 {
        ("no", None, Some(format!("odd degree {}", p.degree())))
    } else {
        match sos_decompose(&p).map_err(core_err)? {
            SosOutcome::Sos(w) => ("yes", Some(w), None),
            SosOutcome::Infeasible { .. } => ("no", None, None),
            SosOutcome::Inconclusive { detail, .. } => ("inconclusive", None, Some(detail)),
        }
    };
    let sos_convex = matches!(is_sos_convex(&p).map_err(core_err)?, SosConvexity::SosConvex(_));
    dump(&SosReport { sos, witness, detail, sos_convex })
}

#[pymodule]
#[pyo3(name = "convexpop")]
fn convexpop_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(sdr, m)?)?;
    m.add_function(wrap_pyfunction!(jensen, m)?)?;
    m.add_function(wrap_pyfunction!(sos_check, m)?)?;
    Ok(())
}
