//! Python bindings: manifold operations, expression evaluation and the JSON
//! job runner behind the command line tool.

use geoconvex_core::cli::{self, Command, JobSpec, RunOptions};
use geoconvex_core::exprlang::{Expr, Signature};
use geoconvex_core::manifold::{self, ManifoldKind, Point};
use geoconvex_core::theorems::TheoremId;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A closed-form Riemannian manifold: `euclidean`, `sphere` or `poincare_ball`.
#[pyclass(frozen, module = "geoconvex")]
struct Manifold(manifold::Manifold);

#[pymethods]
impl Manifold {
    #[new]
    fn new(kind: &str, dim: usize) -> PyResult<Self> {
        let kind = ManifoldKind::ALL
            .into_iter()
            .find(|k| k.name() == kind)
            .ok_or_else(|| value_err(format!("unknown manifold {kind:?}")))?;
        manifold::Manifold::new(kind, dim).map(Self).map_err(value_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind.name()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.0.ambient_dim()
    }

    fn contains(&self, p: Vec<f64>) -> bool {
        self.0.contains(&Point(p))
    }

    /// Point at `t` on the geodesic with `γ(0) = mu2`, `γ(1) = mu1`.
    fn geodesic(&self, mu1: Vec<f64>, mu2: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        self.0.geodesic(&Point(mu1), &Point(mu2), t).map(|p| p.0).map_err(value_err)
    }

    fn distance(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
        self.0.distance(&Point(p), &Point(q)).map_err(value_err)
    }

    fn exp_map(&self, p: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.exp_map(&Point(p), &v).map(|p| p.0).map_err(value_err)
    }

    fn log_map(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.log_map(&Point(p), &Point(q)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Manifold({:?}, {})", self.0.kind.name(), self.0.dim)
    }
}

/// Evaluates `src` with the named variables bound to `values`.
#[pyfunction]
fn eval_expr(src: &str, names: Vec<String>, values: Vec<f64>) -> PyResult<f64> {
    if names.len() != values.len() {
        return Err(value_err(format!("{} names but {} values", names.len(), values.len())));
    }
    let expr = Expr::parse(src, &Signature::new(names)).map_err(value_err)?;
    expr.eval(&values).map_err(value_err)
}

fn command(name: &str) -> PyResult<Command> {
    Command::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| value_err(format!("unknown command {name:?}")))
}

/// Runs a JSON job as the command line tool would and returns
/// `(report_json, exit_code)`. Configuration errors raise `ValueError`.
#[pyfunction]
#[pyo3(signature = (job_json, command_name = "check", seed = None, samples = None, workers = None))]
fn run_job(
    py: Python<'_>,
    job_json: &str,
    command_name: &str,
    seed: Option<u64>,
    samples: Option<u64>,
    workers: Option<usize>,
) -> PyResult<(String, i32)> {
    let spec = JobSpec::from_json(job_json).map_err(value_err)?;
    let cmd = command(command_name)?;
    let opts = RunOptions {
        seed,
        samples,
        workers,
        ..RunOptions::default()
    };
    let report = py.detach(|| cli::run_job(spec, cmd, &opts)).map_err(value_err)?;
    Ok((report.to_json(), report.top_verdict().exit_code()))
}

/// `verify` with the theorem given by id, e.g. `"EpigraphEquiv"`.
#[pyfunction]
#[pyo3(signature = (job_json, theorem, seed = None, samples = None))]
fn verify(
    py: Python<'_>,
    job_json: &str,
    theorem: &str,
    seed: Option<u64>,
    samples: Option<u64>,
) -> PyResult<(String, i32)> {
    let spec = JobSpec::from_json(job_json).map_err(value_err)?;
    let id: TheoremId = theorem.parse().map_err(value_err)?;
    let opts = RunOptions {
        seed,
        samples,
        theorem: Some(id),
        ..RunOptions::default()
    };
    let report = py.detach(|| cli::run_job(spec, Command::Verify, &opts)).map_err(value_err)?;
    Ok((report.to_json(), report.top_verdict().exit_code()))
}

/// Manifolds, charts, theorem ids, expression builtins and commands, as JSON.
#[pyfunction]
fn list_builtins() -> String {
    serde_json::to_string(&cli::list_builtins()).expect("catalog serializes")
}

#[pymodule]
fn geoconvex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Manifold>()?;
    m.add_function(wrap_pyfunction!(eval_expr, m)?)?;
    m.add_function(wrap_pyfunction!(run_job, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(list_builtins, m)?)?;
    m.add("SCHEMA_VERSION", cli::SCHEMA_VERSION)?;
    Ok(())
}
