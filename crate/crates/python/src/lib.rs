//! Python bindings for the spem library: the ansatz, the three execution
//! backends, the non-Hermitian model with its dilation, training, and
//! calibration-based mitigation. Matrices cross the boundary as
//! `list[list[complex]]`, distributions as thin wrapper objects.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use spem::bench;
use spem::circuit;
use spem::mitigate;
use spem::noisesim;
use spem::nonherm;
use spem::numkit::ComplexMatrix;
use spem::varopt;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_to_py(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[pyclass(name = "AnsatzSpec", skip_from_py_object)]
#[derive(Clone)]
struct PyAnsatzSpec {
    inner: circuit::AnsatzSpec,
}

#[pymethods]
impl PyAnsatzSpec {
    /// Linear-chain ansatz on `num_qubits` qubits with `layers` layers.
    #[new]
    fn new(num_qubits: usize, layers: usize) -> PyResult<Self> {
        Ok(Self {
            inner: circuit::AnsatzSpec::chain(num_qubits, layers).map_err(err)?,
        })
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits
    }

    #[getter]
    fn layers(&self) -> usize {
        self.inner.layers
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn cx_count_per_layer(&self) -> usize {
        self.inner.cx_count_per_layer()
    }

    fn __repr__(&self) -> String {
        format!(
            "AnsatzSpec(num_qubits={}, layers={})",
            self.inner.num_qubits, self.inner.layers
        )
    }
}

#[pyclass(name = "NoiseModel", skip_from_py_object)]
#[derive(Clone)]
struct PyNoiseModel {
    inner: noisesim::NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    #[new]
    #[pyo3(signature = (cx_depol = 0.0, readout_flip = 0.0))]
    fn new(cx_depol: f64, readout_flip: f64) -> PyResult<Self> {
        Ok(Self {
            inner: noisesim::NoiseModel::new(cx_depol, readout_flip).map_err(err)?,
        })
    }

    #[getter]
    fn cx_depol(&self) -> f64 {
        self.inner.cx_depol
    }

    #[getter]
    fn readout_flip(&self) -> f64 {
        self.inner.readout_flip
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseModel(cx_depol={}, readout_flip={})",
            self.inner.cx_depol, self.inner.readout_flip
        )
    }
}

#[pyclass(name = "TfiParams", skip_from_py_object)]
#[derive(Clone)]
struct PyTfiParams {
    inner: nonherm::TfiParams,
}

#[pymethods]
impl PyTfiParams {
    #[new]
    #[pyo3(signature = (sites = 4, coupling = 1.0, transverse_field = 1.5, imaginary_field = -0.5))]
    fn new(
        sites: usize,
        coupling: f64,
        transverse_field: f64,
        imaginary_field: f64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: nonherm::TfiParams::new(sites, coupling, transverse_field, imaginary_field)
                .map_err(err)?,
        })
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.sites
    }

    fn initial_state_index(&self) -> usize {
        self.inner.initial_state_index()
    }

    fn __repr__(&self) -> String {
        format!(
            "TfiParams(sites={}, coupling={}, transverse_field={}, imaginary_field={})",
            self.inner.sites,
            self.inner.coupling,
            self.inner.transverse_field,
            self.inner.imaginary_field
        )
    }
}

#[pyclass(name = "TimeGrid", skip_from_py_object)]
#[derive(Clone)]
struct PyTimeGrid {
    inner: nonherm::TimeGrid,
}

#[pymethods]
impl PyTimeGrid {
    #[new]
    #[pyo3(signature = (dt = 2.0, steps = 11))]
    fn new(dt: f64, steps: usize) -> PyResult<Self> {
        if dt <= 0.0 || steps == 0 {
            return Err(PyValueError::new_err("need dt > 0 and steps >= 1"));
        }
        Ok(Self {
            inner: nonherm::TimeGrid::new(dt, steps),
        })
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }
}

#[pyclass(name = "TrainConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: varopt::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (restarts = 8, max_iterations = 500, seed = 0, early_stop_cost = 1e-8, perturbation = std::f64::consts::FRAC_PI_4))]
    fn new(
        restarts: usize,
        max_iterations: usize,
        seed: u64,
        early_stop_cost: f64,
        perturbation: f64,
    ) -> Self {
        Self {
            inner: varopt::TrainConfig {
                restarts,
                max_iterations,
                seed,
                early_stop_cost,
                perturbation,
                ..varopt::TrainConfig::default()
            },
        }
    }
}

#[pyclass(name = "OutcomeDistribution", skip_from_py_object)]
#[derive(Clone)]
struct PyOutcomeDistribution {
    inner: noisesim::OutcomeDistribution,
}

#[pymethods]
impl PyOutcomeDistribution {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            noisesim::DistKind::Probability => "probability",
            noisesim::DistKind::Quasi => "quasi",
        }
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn total_variation(&self, other: &PyOutcomeDistribution) -> f64 {
        self.inner.total_variation(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "OutcomeDistribution(kind='{}', dim={})",
            self.kind(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "CalibrationMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyCalibrationMatrix {
    inner: mitigate::CalibrationMatrix,
}

#[pymethods]
impl PyCalibrationMatrix {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn cond(&self) -> f64 {
        self.inner.cond
    }

    /// Column-major entries: `columns[i][j] = P(outcome j | input i)`.
    #[getter]
    fn columns(&self) -> Vec<Vec<f64>> {
        self.inner.columns.clone()
    }

    fn entry(&self, outcome: usize, input: usize) -> f64 {
        self.inner.entry(outcome, input)
    }

    fn __repr__(&self) -> String {
        format!(
            "CalibrationMatrix(dim={}, cond={:.4})",
            self.inner.dim, self.inner.cond
        )
    }
}

#[pyclass(name = "TrainedStep", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainedStep {
    #[pyo3(get)]
    t: f64,
    #[pyo3(get)]
    cost: f64,
    #[pyo3(get)]
    params: Vec<f64>,
}

#[pymethods]
impl PyTrainedStep {
    fn __repr__(&self) -> String {
        format!("TrainedStep(t={}, cost={:.3e})", self.t, self.cost)
    }
}

fn parse_backend(backend: &str) -> PyResult<mitigate::Backend> {
    match backend {
        "density" => Ok(mitigate::Backend::Density),
        "trajectory" => Ok(mitigate::Backend::Trajectory),
        other => Err(PyValueError::new_err(format!(
            "backend '{other}' is not 'density' or 'trajectory'"
        ))),
    }
}

fn parse_policy(policy: &str) -> PyResult<mitigate::MitigationPolicy> {
    match policy {
        "simplex" => Ok(mitigate::MitigationPolicy::Simplex),
        "raw_quasi" => Ok(mitigate::MitigationPolicy::RawQuasi),
        other => Err(PyValueError::new_err(format!(
            "policy '{other}' is not 'simplex' or 'raw_quasi'"
        ))),
    }
}

fn to_params(spec: &PyAnsatzSpec, params: Vec<f64>) -> PyResult<circuit::ParamVector> {
    circuit::ParamVector::from_vec(&spec.inner, params).map_err(err)
}

#[pyfunction]
fn u3_matrix(theta: f64, phi: f64, lam: f64) -> Vec<Vec<Complex64>> {
    matrix_to_py(&circuit::u3_matrix(&circuit::U3Params::new(
        theta, phi, lam,
    )))
}

#[pyfunction]
fn identity_params(spec: &PyAnsatzSpec) -> Vec<f64> {
    circuit::identity_params(&spec.inner).into_vec()
}

#[pyfunction]
fn ansatz_unitary(spec: &PyAnsatzSpec, params: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
    let params = to_params(spec, params)?;
    Ok(matrix_to_py(
        &circuit::ansatz_unitary(&spec.inner, &params).map_err(err)?,
    ))
}

#[pyfunction]
fn build_hamiltonian(tfi: &PyTfiParams) -> Vec<Vec<Complex64>> {
    matrix_to_py(&nonherm::build_hamiltonian(&tfi.inner))
}

#[pyfunction]
fn evolution_operator(tfi: &PyTfiParams, t: f64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(matrix_to_py(
        &nonherm::evolution_operator(&tfi.inner, t).map_err(err)?,
    ))
}

/// The unitary dilation of exp(-i t H) and its normalization factor u.
#[pyfunction]
fn embed_evolution(tfi: &PyTfiParams, t: f64) -> PyResult<(Vec<Vec<Complex64>>, f64)> {
    let emb = nonherm::embedded_evolution(&tfi.inner, t).map_err(err)?;
    Ok((matrix_to_py(&emb.matrix), emb.u))
}

#[pyfunction]
fn exact_reference(tfi: &PyTfiParams, grid: &PyTimeGrid) -> PyResult<Vec<f64>> {
    nonherm::exact_reference(&tfi.inner, &grid.inner).map_err(err)
}

#[pyfunction]
fn run_ideal(
    spec: &PyAnsatzSpec,
    params: Vec<f64>,
    input_index: usize,
) -> PyResult<PyOutcomeDistribution> {
    let params = to_params(spec, params)?;
    Ok(PyOutcomeDistribution {
        inner: noisesim::run_ideal(&spec.inner, &params, input_index).map_err(err)?,
    })
}

#[pyfunction]
fn run_density_noisy(
    spec: &PyAnsatzSpec,
    params: Vec<f64>,
    input_index: usize,
    noise: &PyNoiseModel,
) -> PyResult<PyOutcomeDistribution> {
    let params = to_params(spec, params)?;
    Ok(PyOutcomeDistribution {
        inner: noisesim::run_density_noisy(&spec.inner, &params, input_index, &noise.inner)
            .map_err(err)?,
    })
}

#[pyfunction]
fn run_trajectories(
    spec: &PyAnsatzSpec,
    params: Vec<f64>,
    input_index: usize,
    noise: &PyNoiseModel,
    shots: u64,
    seed: u64,
) -> PyResult<PyOutcomeDistribution> {
    let params = to_params(spec, params)?;
    let plan = noisesim::ShotPlan::new(shots, seed).map_err(err)?;
    Ok(PyOutcomeDistribution {
        inner: noisesim::run_trajectories(&spec.inner, &params, input_index, &noise.inner, &plan)
            .map_err(err)?,
    })
}

/// Keeps the ancilla-up half and renormalizes; returns (distribution, kept mass).
#[pyfunction]
fn post_select(dist: &PyOutcomeDistribution) -> PyResult<(PyOutcomeDistribution, f64)> {
    let (kept, mass) = nonherm::post_select(&dist.inner).map_err(err)?;
    Ok((PyOutcomeDistribution { inner: kept }, mass))
}

#[pyfunction]
fn z_magnetization(dist: &PyOutcomeDistribution) -> f64 {
    nonherm::z_magnetization(&dist.inner)
}

#[pyfunction]
fn train_evolution(
    spec: &PyAnsatzSpec,
    tfi: &PyTfiParams,
    grid: &PyTimeGrid,
    cfg: &PyTrainConfig,
) -> PyResult<Vec<PyTrainedStep>> {
    let results =
        varopt::train_evolution(&spec.inner, &tfi.inner, &grid.inner, &cfg.inner).map_err(err)?;
    Ok(varopt::to_trained_steps(&grid.inner, &results)
        .into_iter()
        .map(|s| PyTrainedStep {
            t: s.t,
            cost: s.cost,
            params: s.params,
        })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (spec, cfg, mode = "analytic"))]
fn train_identity(spec: &PyAnsatzSpec, cfg: &PyTrainConfig, mode: &str) -> PyResult<PyTrainedStep> {
    let mode = match mode {
        "analytic" => varopt::IdentityMode::Analytic,
        "variational" => varopt::IdentityMode::Variational,
        other => {
            return Err(PyValueError::new_err(format!(
                "identity mode '{other}' is not 'analytic' or 'variational'"
            )))
        }
    };
    let result = varopt::train_identity(&spec.inner, &cfg.inner, mode).map_err(err)?;
    Ok(PyTrainedStep {
        t: 0.0,
        cost: result.final_cost,
        params: result.params.into_vec(),
    })
}

#[pyfunction]
#[pyo3(signature = (spec, identity_params, noise, backend = "density", shots = None, seed = 0))]
fn build_full_calibration(
    spec: &PyAnsatzSpec,
    identity_params: Vec<f64>,
    noise: &PyNoiseModel,
    backend: &str,
    shots: Option<u64>,
    seed: u64,
) -> PyResult<PyCalibrationMatrix> {
    let backend = parse_backend(backend)?;
    let params = to_params(spec, identity_params)?;
    let plan = shots
        .map(|s| noisesim::ShotPlan::new(s, seed))
        .transpose()
        .map_err(err)?;
    Ok(PyCalibrationMatrix {
        inner: mitigate::build_full_calibration(
            &spec.inner,
            &params,
            &noise.inner,
            backend,
            plan.as_ref(),
        )
        .map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (num_qubits, noise, backend = "density", shots = None, seed = 0))]
fn build_readout_calibration(
    num_qubits: usize,
    noise: &PyNoiseModel,
    backend: &str,
    shots: Option<u64>,
    seed: u64,
) -> PyResult<PyCalibrationMatrix> {
    let backend = parse_backend(backend)?;
    let plan = shots
        .map(|s| noisesim::ShotPlan::new(s, seed))
        .transpose()
        .map_err(err)?;
    Ok(PyCalibrationMatrix {
        inner: mitigate::build_readout_calibration(
            num_qubits,
            &noise.inner,
            backend,
            plan.as_ref(),
        )
        .map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (dist, calibration, policy = "simplex"))]
fn mitigate_distribution(
    dist: &PyOutcomeDistribution,
    calibration: &PyCalibrationMatrix,
    policy: &str,
) -> PyResult<PyOutcomeDistribution> {
    let policy = parse_policy(policy)?;
    Ok(PyOutcomeDistribution {
        inner: mitigate::mitigate(&dist.inner, &calibration.inner, policy).map_err(err)?,
    })
}

/// Runs a whole configured experiment from flat `key = value` config text;
/// returns one dict per time step.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_text: &str) -> PyResult<Vec<Py<PyAny>>> {
    let cfg = bench::config::parse(config_text).map_err(err)?;
    let mut cache = bench::ParamCache::in_memory();
    let records = bench::run_experiment(&cfg, &mut cache).map_err(err)?;
    records
        .into_iter()
        .map(|r| {
            let dict = pyo3::types::PyDict::new(py);
            dict.set_item("t", r.t)?;
            dict.set_item("z_exact", r.z_exact)?;
            dict.set_item("z_raw", r.z_raw)?;
            dict.set_item("z_readout", r.z_readout)?;
            dict.set_item("z_full", r.z_full)?;
            dict.set_item("success_prob", r.success_prob)?;
            dict.set_item("train_cost", r.train_cost)?;
            Ok(dict.into_any().unbind())
        })
        .collect()
}

/// Runs the configured error-rate x depth sweep; returns one dict per cell.
#[pyfunction]
fn sweep(py: Python<'_>, config_text: &str) -> PyResult<Vec<Py<PyAny>>> {
    let cfg = bench::config::parse(config_text).map_err(err)?;
    let mut cache = bench::ParamCache::in_memory();
    let rows = bench::sweep(&cfg, &mut cache).map_err(err)?;
    rows.into_iter()
        .map(|r| {
            let dict = pyo3::types::PyDict::new(py);
            dict.set_item("p", r.p)?;
            dict.set_item("n", r.n)?;
            dict.set_item("dev_raw", r.dev_raw)?;
            dict.set_item("dev_readout", r.dev_readout)?;
            dict.set_item("dev_full", r.dev_full)?;
            Ok(dict.into_any().unbind())
        })
        .collect()
}

#[pymodule]
fn spem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAnsatzSpec>()?;
    m.add_class::<PyNoiseModel>()?;
    m.add_class::<PyTfiParams>()?;
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyOutcomeDistribution>()?;
    m.add_class::<PyCalibrationMatrix>()?;
    m.add_class::<PyTrainedStep>()?;
    m.add_function(wrap_pyfunction!(u3_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(identity_params, m)?)?;
    m.add_function(wrap_pyfunction!(ansatz_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(build_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(evolution_operator, m)?)?;
    m.add_function(wrap_pyfunction!(embed_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(exact_reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(run_density_noisy, m)?)?;
    m.add_function(wrap_pyfunction!(run_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(post_select, m)?)?;
    m.add_function(wrap_pyfunction!(z_magnetization, m)?)?;
    m.add_function(wrap_pyfunction!(train_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(train_identity, m)?)?;
    m.add_function(wrap_pyfunction!(build_full_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(build_readout_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(mitigate_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
