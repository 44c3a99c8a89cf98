//! Python bindings: exponential families, the entropy-gradient flow and
//! two-subsystem relaxation. Vectors cross the boundary as lists of floats
//! and matrices as lists of rows.

use infodyn::coupled::{self, CompositeSystem as CoreComposite};
use infodyn::duality::StateManifold;
use infodyn::flow::{IntegratorOptions, Trajectory};
use infodyn::{geometry, onsager, Error, ExponentialFamily};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn vector(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn options(tau_max: f64, h: f64, sigma_eq: f64, record_every: usize) -> IntegratorOptions {
    IntegratorOptions { h, tau_max, sigma_eq, record_every }
}

fn trajectory_dict<'py>(py: Python<'py>, traj: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    let column = |f: fn(&infodyn::Sample) -> f64| traj.samples.iter().map(f).collect::<Vec<f64>>();
    out.set_item("tau", column(|s| s.tau))?;
    out.set_item("A", traj.samples.iter().map(|s| s.a.as_slice().to_vec()).collect::<Vec<_>>())?;
    out.set_item("lambda", traj.samples.iter().map(|s| s.lambda.as_slice().to_vec()).collect::<Vec<_>>())?;
    out.set_item("S", column(|s| s.entropy))?;
    out.set_item("sigma", column(|s| s.sigma))?;
    out.set_item("speed", column(|s| s.speed))?;
    out.set_item("status", traj.status.as_str())?;
    Ok(out)
}

fn state_dict<'py, M: StateManifold + ?Sized>(py: Python<'py>, m: &M, a: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let point = m.state(&vector(a), None).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("A", point.a.as_slice().to_vec())?;
    out.set_item("lambda", point.lambda.as_slice().to_vec())?;
    out.set_item("S", point.entropy)?;
    out.set_item("sigma", point.sigma())?;
    out.set_item("metric", rows(point.metric.matrix()))?;
    Ok(out)
}

/// A maximum-entropy exponential family.
#[pyclass(name = "Family", module = "infodyn_py", skip_from_py_object)]
#[derive(Clone)]
pub struct Family {
    inner: ExponentialFamily,
}

#[pymethods]
impl Family {
    #[staticmethod]
    fn bernoulli() -> Self {
        Self { inner: ExponentialFamily::bernoulli() }
    }

    #[staticmethod]
    fn gaussian_mean(dim: usize) -> PyResult<Self> {
        Ok(Self { inner: ExponentialFamily::gaussian_mean(dim).map_err(to_py)? })
    }

    #[staticmethod]
    fn ideal_gas(volume: f64) -> PyResult<Self> {
        Ok(Self { inner: ExponentialFamily::ideal_gas(volume).map_err(to_py)? })
    }

    #[staticmethod]
    fn ideal_gas_energy(volume: f64, particles: f64) -> PyResult<Self> {
        Ok(Self { inner: ExponentialFamily::ideal_gas_energy(volume, particles).map_err(to_py)? })
    }

    /// Tabulated family from a JSON document `{"points", "weights", "stats"}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ExponentialFamily::from_json_str(text).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.statistic_names().to_vec()
    }

    fn log_partition(&self, lam: Vec<f64>) -> PyResult<f64> {
        self.inner.log_partition(&vector(lam)).map_err(to_py)
    }

    fn mean(&self, lam: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.mean_parameters(&vector(lam)).map_err(to_py)?.as_slice().to_vec())
    }

    fn covariance(&self, lam: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.covariance(&vector(lam)).map_err(to_py)?))
    }

    fn solve_lambda(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        let lam = infodyn::solve_lambda(&self.inner, &vector(a), None).map_err(to_py)?;
        Ok(lam.as_slice().to_vec())
    }

    fn entropy(&self, a: Vec<f64>) -> PyResult<f64> {
        infodyn::entropy(&self.inner, &vector(a)).map_err(to_py)
    }

    /// Entropy, forces, `sigma` and metric at `a`.
    fn state<'py>(&self, py: Python<'py>, a: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        state_dict(py, &self.inner, a)
    }

    fn metric(&self, a: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(geometry::metric(&self.inner, &vector(a)).map_err(to_py)?.matrix()))
    }

    fn sigma(&self, a: Vec<f64>) -> PyResult<f64> {
        geometry::sigma(&self.inner, &vector(a)).map_err(to_py)
    }

    #[pyo3(signature = (a, step = geometry::DEFAULT_FD_STEP))]
    fn christoffel(&self, a: Vec<f64>, step: f64) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(geometry::christoffel(&self.inner, &vector(a), step).map_err(to_py)?.to_nested())
    }

    #[pyo3(signature = (a, clock_rate = 1.0))]
    fn onsager(&self, a: Vec<f64>, clock_rate: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&onsager::onsager_matrix(&self.inner, &vector(a), clock_rate).map_err(to_py)?.l))
    }

    #[pyo3(signature = (a0, tau_max, h = 1e-3, sigma_eq = 1e-8, record_every = 1))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        a0: Vec<f64>,
        tau_max: f64,
        h: f64,
        sigma_eq: f64,
        record_every: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = options(tau_max, h, sigma_eq, record_every);
        let traj = infodyn::integrate(&self.inner, &vector(a0), &opts).map_err(to_py)?;
        trajectory_dict(py, &traj)
    }

    fn __repr__(&self) -> String {
        format!("Family({})", self.inner.describe())
    }
}

/// Two families exchanging conserved quantities with fixed totals.
#[pyclass(name = "CompositeSystem", module = "infodyn_py", skip_from_py_object)]
pub struct CompositeSystem {
    inner: CoreComposite,
}

#[pymethods]
impl CompositeSystem {
    #[new]
    fn new(first: PyRef<'_, Family>, second: PyRef<'_, Family>, total: Vec<f64>) -> PyResult<Self> {
        let inner = CoreComposite::new(first.inner.clone(), second.inner.clone(), vector(total)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn partner(&self, a: Vec<f64>) -> Vec<f64> {
        self.inner.partner(&vector(a)).as_slice().to_vec()
    }

    fn entropy(&self, a: Vec<f64>) -> PyResult<f64> {
        coupled::composite_entropy(&self.inner, &vector(a)).map_err(to_py)
    }

    fn metric(&self, a: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(coupled::composite_metric(&self.inner, &vector(a)).map_err(to_py)?.matrix()))
    }

    fn velocity(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(coupled::coupled_velocity(&self.inner, &vector(a)).map_err(to_py)?.as_slice().to_vec())
    }

    fn state<'py>(&self, py: Python<'py>, a: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        state_dict(py, &self.inner, a)
    }

    #[pyo3(signature = (a, clock_rate = 1.0))]
    fn onsager(&self, a: Vec<f64>, clock_rate: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&onsager::onsager_matrix(&self.inner, &vector(a), clock_rate).map_err(to_py)?.l))
    }

    /// Trajectory columns plus `A_prime` and `conservation_residual`.
    #[pyo3(signature = (a0, tau_max, h = 1e-3, sigma_eq = 1e-8, record_every = 1))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        a0: Vec<f64>,
        tau_max: f64,
        h: f64,
        sigma_eq: f64,
        record_every: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = options(tau_max, h, sigma_eq, record_every);
        let ct = coupled::integrate_coupled(&self.inner, &vector(a0), &opts).map_err(to_py)?;
        let out = trajectory_dict(py, &ct.trajectory)?;
        out.set_item("A_prime", ct.samples.iter().map(|s| s.a_prime.as_slice().to_vec()).collect::<Vec<_>>())?;
        out.set_item("conservation_residual", ct.samples.iter().map(|s| s.conservation_residual).collect::<Vec<_>>())?;
        Ok(out)
    }
}

/// Runs a scenario config file; returns the exit code and the summary.
#[pyfunction]
#[pyo3(signature = (config, output_dir = "."))]
fn run_scenario(config: &str, output_dir: &str) -> PyResult<(i32, Option<String>)> {
    let cfg = infodyn::cli::parse_config(config).map_err(to_py)?;
    let opts = infodyn::cli::RunOptions { output_dir: output_dir.into(), timing: false };
    let outcome = infodyn::cli::run_scenario(&cfg, &opts);
    Ok((outcome.exit_code, outcome.summary.map(|s| s.to_string())))
}

#[pymodule]
fn infodyn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Family>()?;
    m.add_class::<CompositeSystem>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
