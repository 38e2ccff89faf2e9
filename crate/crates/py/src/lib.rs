//! Python module `cdme`: bases, creation rates, hierarchy generators and
//! states, the particle simulator and the comparison oracles.

use std::sync::Arc;

use cdme_core::analysis;
use cdme_core::generator::{self, IntegratorConfig, IntegratorMethod};
use cdme_core::mcsim;
use cdme_core::spectral::{self, RateFn};
use cdme_core::state;
use cdme_core::CdmeError;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: CdmeError) -> PyErr {
    match e {
        CdmeError::Domain(_) => PyIndexError::new_err(e.to_string()),
        CdmeError::Validation(_) | CdmeError::SizeCap { .. } | CdmeError::SpaceMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<T: serde::Serialize + ?Sized>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?
        .call_method1("loads", (text,))?
        .unbind())
}

#[pyclass(name = "ModeBasis", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModeBasis(spectral::ModeBasis);

#[pymethods]
impl PyModeBasis {
    #[new]
    fn new(num_modes: usize) -> PyResult<Self> {
        spectral::make_basis(num_modes).map(Self).map_err(to_py)
    }

    #[getter]
    fn num_modes(&self) -> usize {
        self.0.num_modes()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues().to_vec()
    }

    fn eval_mode(&self, k: usize, x: f64) -> PyResult<f64> {
        self.0.eval_mode(k, x).map_err(to_py)
    }

    fn synthesize(&self, coeffs: Vec<f64>, x: f64) -> f64 {
        self.0.synthesize(&coeffs, x)
    }
}

#[pyclass(name = "CreationRate", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCreationRate(spectral::CreationRate);

impl PyCreationRate {
    fn project(basis: &PyModeBasis, rate: RateFn, quad_points: Option<usize>) -> PyResult<Self> {
        let q = quad_points.unwrap_or_else(|| basis.0.default_quad_points());
        spectral::project_creation_rate(&basis.0, rate, q)
            .map(Self)
            .map_err(to_py)
    }
}

#[pymethods]
impl PyCreationRate {
    #[staticmethod]
    #[pyo3(signature = (basis, gamma, quad_points=None))]
    fn constant(basis: &PyModeBasis, gamma: f64, quad_points: Option<usize>) -> PyResult<Self> {
        Self::project(basis, RateFn::Constant(gamma), quad_points)
    }

    /// Coefficients on the orthonormal cosine modes, mode 0 first.
    #[staticmethod]
    #[pyo3(signature = (basis, coeffs, quad_points=None))]
    fn cosine(basis: &PyModeBasis, coeffs: Vec<f64>, quad_points: Option<usize>) -> PyResult<Self> {
        Self::project(basis, RateFn::Cosine(coeffs), quad_points)
    }

    /// Piecewise-linear profile through `(xs[i], values[i])`.
    #[staticmethod]
    #[pyo3(signature = (basis, xs, values, quad_points=None))]
    fn table(
        basis: &PyModeBasis,
        xs: Vec<f64>,
        values: Vec<f64>,
        quad_points: Option<usize>,
    ) -> PyResult<Self> {
        let rate = RateFn::table(xs, values).map_err(to_py)?;
        Self::project(basis, rate, quad_points)
    }

    #[getter]
    fn total_rate(&self) -> f64 {
        self.0.total_rate()
    }

    #[getter]
    fn mode_coeffs(&self) -> Vec<f64> {
        self.0.mode_coeffs().to_vec()
    }

    #[getter]
    fn density_sup(&self) -> f64 {
        self.0.density_sup()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }
}

#[pyclass(name = "MultiIndexSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpace(Arc<state::MultiIndexSpace>);

#[pymethods]
impl PySpace {
    #[new]
    fn new(num_modes: usize, max_degree: usize) -> PyResult<Self> {
        state::make_space(num_modes, max_degree)
            .map(|s| Self(Arc::new(s)))
            .map_err(to_py)
    }

    #[getter]
    fn num_modes(&self) -> usize {
        self.0.num_modes()
    }

    #[getter]
    fn max_degree(&self) -> usize {
        self.0.max_degree()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn index(&self, i: usize) -> PyResult<Vec<u32>> {
        if i >= self.0.len() {
            return Err(PyIndexError::new_err(format!("offset {i} out of range")));
        }
        Ok(self.0.index(i).to_vec())
    }

    fn lookup(&self, beta: Vec<u32>) -> Option<usize> {
        self.0.lookup(&beta)
    }
}

#[pyclass(name = "GeneratorMatrix", frozen, skip_from_py_object)]
struct PyGenerator(generator::GeneratorMatrix);

#[pymethods]
impl PyGenerator {
    #[staticmethod]
    fn from_genfun(
        space: &PySpace,
        basis: &PyModeBasis,
        creation: &PyCreationRate,
        lambda_d: f64,
    ) -> PyResult<Self> {
        generator::assemble_from_genfun(space.0.clone(), &basis.0, &creation.0, lambda_d)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (space, basis, creation, lambda_d, quad_points=None))]
    fn from_cdme(
        space: &PySpace,
        basis: &PyModeBasis,
        creation: &PyCreationRate,
        lambda_d: f64,
        quad_points: Option<usize>,
    ) -> PyResult<Self> {
        let q = quad_points.unwrap_or_else(|| basis.0.default_quad_points());
        generator::assemble_from_cdme(space.0.clone(), &basis.0, &creation.0, lambda_d, q)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.0.dim() || col >= self.0.dim() {
            return Err(PyIndexError::new_err(format!(
                "entry ({row}, {col}) out of range"
            )));
        }
        Ok(self.0.get(row, col))
    }

    /// `(row, col, value)` triplets in row-major order.
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.0.entries().collect()
    }

    fn matvec(&self, c: Vec<f64>) -> PyResult<Vec<f64>> {
        if c.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!(
                "vector has {} entries, generator is {}x{}",
                c.len(),
                self.0.dim(),
                self.0.dim()
            )));
        }
        Ok(self.0.mul_vec(&c))
    }

    fn to_coo(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.0
            .write_coo(&mut buf)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn space(&self) -> PySpace {
        PySpace(self.0.space().clone())
    }
}

#[pyclass(name = "CoeffState", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(state::CoeffState);

#[pymethods]
impl PyState {
    #[staticmethod]
    fn vacuum(space: &PySpace) -> Self {
        Self(state::CoeffState::vacuum(space.0.clone()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        state::CoeffState::from_json(text).map(Self).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.0.time()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.0.coeffs().to_vec()
    }

    fn number_law(&self) -> Vec<f64> {
        self.0.number_law()
    }

    fn mass(&self) -> f64 {
        self.0.mass()
    }

    fn intensity_coeffs(&self) -> Vec<f64> {
        self.0.intensity_coeffs()
    }

    fn intensity(&self, x: f64) -> f64 {
        self.0.intensity(x)
    }

    fn eval_kernel(&self, xs: Vec<f64>) -> PyResult<f64> {
        self.0.eval_kernel(&xs).map_err(to_py)
    }
}

fn parse_method(method: &str) -> PyResult<IntegratorMethod> {
    match method {
        "auto" => Ok(IntegratorMethod::Auto),
        "expm" => Ok(IntegratorMethod::Expm),
        "rk4" => Ok(IntegratorMethod::Rk4),
        other => Err(PyValueError::new_err(format!(
            "unknown method {other:?}; expected auto, expm or rk4"
        ))),
    }
}

/// States at each output time.
#[pyfunction]
#[pyo3(signature = (state, generator, times, method="auto", dt=None))]
fn evolve(
    py: Python<'_>,
    state: &PyState,
    generator: &PyGenerator,
    times: Vec<f64>,
    method: &str,
    dt: Option<f64>,
) -> PyResult<Vec<PyState>> {
    let mut cfg = IntegratorConfig::new(parse_method(method)?, times);
    cfg.dt = dt;
    let out = py.detach(|| generator::evolve(&state.0, &generator.0, &cfg));
    out.map(|v| v.into_iter().map(PyState).collect())
        .map_err(to_py)
}

/// Replica-averaged number law and intensity histogram at `horizon`.
#[pyfunction]
#[pyo3(signature = (creation, lambda_d, horizon, replicas, master_seed, bins=20))]
fn simulate(
    py: Python<'_>,
    creation: &PyCreationRate,
    lambda_d: f64,
    horizon: f64,
    replicas: u64,
    master_seed: u64,
    bins: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = mcsim::SimConfig::new(creation.0.clone(), lambda_d, horizon, replicas, master_seed)
        .and_then(|c| c.with_bins(bins))
        .map_err(to_py)?;
    let est = py.detach(|| mcsim::estimate(&cfg)).map_err(to_py)?;
    json_to_py(py, &est)
}

/// Particle positions of one replica at `horizon`.
#[pyfunction]
fn run_replica(
    creation: &PyCreationRate,
    lambda_d: f64,
    horizon: f64,
    master_seed: u64,
    replica_id: u64,
) -> PyResult<Vec<f64>> {
    let cfg = mcsim::SimConfig::new(creation.0.clone(), lambda_d, horizon, 2, master_seed)
        .map_err(to_py)?;
    mcsim::run_replica(&cfg, replica_id)
        .map(|e| e.positions)
        .map_err(to_py)
}

/// Integrated master-equation law from the empty state at each time.
#[pyfunction]
fn cme_number_law(
    max_count: usize,
    gamma: f64,
    lambda_d: f64,
    times: Vec<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    analysis::cme_generator(max_count, gamma, lambda_d)
        .and_then(|s| s.evolve_from_vacuum(&times))
        .map_err(to_py)
}

#[pyfunction]
fn cme_stationary(max_count: usize, gamma: f64, lambda_d: f64) -> PyResult<Vec<f64>> {
    analysis::cme_generator(max_count, gamma, lambda_d)
        .and_then(|s| analysis::cme_stationary(&s))
        .map_err(to_py)
}

#[pyfunction]
fn creation_only_law(gamma: f64, t: f64, max_count: usize) -> Vec<f64> {
    analysis::creation_only_law(gamma, t, max_count)
}

#[pyfunction]
fn weierstrass_transfer_check(n: usize, grid: Vec<f64>) -> PyResult<f64> {
    analysis::weierstrass_transfer_check(n, &grid).map_err(to_py)
}

/// Total variation, or z-scores when `stderr` is given; returns the report
/// as a dict.
#[pyfunction]
#[pyo3(signature = (a, b, stderr=None, tolerance=1e-6, z_threshold=3.0, stderr_floor=0.0))]
fn compare_number_laws(
    py: Python<'_>,
    a: Vec<f64>,
    b: Vec<f64>,
    stderr: Option<Vec<f64>>,
    tolerance: f64,
    z_threshold: f64,
    stderr_floor: f64,
) -> PyResult<Py<PyAny>> {
    let opts = analysis::CompareOptions {
        tv_tolerance: tolerance,
        z_threshold,
        stderr_floor,
    };
    let r = analysis::compare_number_laws(&a, &b, stderr.as_deref(), &opts).map_err(to_py)?;
    json_to_py(py, &r)
}

#[pyfunction]
fn compare_generators(
    py: Python<'_>,
    a: &PyGenerator,
    b: &PyGenerator,
    tolerance: f64,
) -> PyResult<Py<PyAny>> {
    let r = analysis::compare_generators(&a.0, &b.0, tolerance).map_err(to_py)?;
    json_to_py(py, &r)
}

#[pymodule]
fn cdme(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModeBasis>()?;
    m.add_class::<PyCreationRate>()?;
    m.add_class::<PySpace>()?;
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_replica, m)?)?;
    m.add_function(wrap_pyfunction!(cme_number_law, m)?)?;
    m.add_function(wrap_pyfunction!(cme_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(creation_only_law, m)?)?;
    m.add_function(wrap_pyfunction!(weierstrass_transfer_check, m)?)?;
    m.add_function(wrap_pyfunction!(compare_number_laws, m)?)?;
    m.add_function(wrap_pyfunction!(compare_generators, m)?)?;
    Ok(())
}
