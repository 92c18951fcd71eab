use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use beam::cli::{cmd_train, load_artifact, ExperimentConfig, Source};
use beam::fdm::{solve_fdm, Grid, DEFAULT_NX};
use beam::metrics::{compute_errors, Predictor};
use beam::network::ModelKind;
use beam::problems::{residual_of_exact, ProblemId};
use beam::sampler::eval_grid;
use beam::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::OutOfBounds { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn problem_id(name: &str) -> PyResult<ProblemId> {
    name.parse().map_err(err)
}

/// Exact displacement of problem `problem` ("p1", "p2" or "p3").
#[pyfunction]
fn exact(problem: &str, x: f64, t: f64) -> PyResult<f64> {
    Ok(problem_id(problem)?.spec().exact(x, t))
}

#[pyfunction]
fn exact_residual(problem: &str, x: f64, t: f64) -> PyResult<f64> {
    Ok(residual_of_exact(&problem_id(problem)?.spec(), x, t))
}

/// Leapfrog solution as rows of nodal values, one row per time level.
#[pyfunction]
#[pyo3(signature = (problem, nx=DEFAULT_NX, dt=None))]
fn fdm(problem: &str, nx: usize, dt: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    let p = problem_id(problem)?.spec();
    let sol = solve_fdm(&p, &Grid::new(&p, nx, dt).map_err(err)?).map_err(err)?;
    Ok((0..sol.grid.nt).map(|j| sol.row(j).to_vec()).collect())
}

/// A trained network or trial model loaded from disk.
#[pyclass]
struct Model {
    source: Source,
    problem: ProblemId,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(problem: &str, path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            source: load_artifact(&path).map_err(err)?,
            problem: problem_id(problem)?,
        })
    }

    fn predict(&self, points: Vec<(f64, f64)>) -> PyResult<Vec<f64>> {
        self.source.predict(&points).map_err(err)
    }

    /// `(E2, E3, E4)` on an `nx` by `nt` grid.
    #[pyo3(signature = (nx=101, nt=101))]
    fn errors(&self, nx: usize, nt: usize) -> PyResult<(f64, f64, f64)> {
        let p = self.problem.spec();
        let grid = eval_grid(&p, nx, nt).map_err(err)?;
        let r = compute_errors(&self.source, &p, &grid, "model").map_err(err)?;
        Ok((r.e2, r.e3, r.e4))
    }
}

/// Trains with default settings and writes artifacts to `out`. Returns the
/// final weighted loss and the loaded model.
#[pyfunction]
#[pyo3(signature = (problem, model, out, epochs=None, seed=0))]
fn train(
    py: Python<'_>,
    problem: &str,
    model: &str,
    out: PathBuf,
    epochs: Option<usize>,
    seed: u64,
) -> PyResult<(f64, Model)> {
    let pid = problem_id(problem)?;
    let kind: ModelKind = model.parse().map_err(err)?;
    let mut c = ExperimentConfig::defaults(pid, kind);
    c.seed = seed;
    c.out_dir = out.clone();
    if let Some(e) = epochs {
        c.schedule.total_epochs = e;
    }
    let summary = py.allow_threads(|| cmd_train(&c)).map_err(err)?;
    Ok((summary.final_loss.total, Model::load(problem, out)?))
}

#[pymodule]
fn beam_pinn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(exact, m)?)?;
    m.add_function(wrap_pyfunction!(exact_residual, m)?)?;
    m.add_function(wrap_pyfunction!(fdm, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
