use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use squeezesim::experiment::sweep_point;
use squeezesim::probe::simulate_records;
use squeezesim::spin::{self, coherent_spin_state};
use squeezesim::squeezing::squeezing_report_with;
use squeezesim as core;

fn to_py(e: core::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_spin(f: &str) -> PyResult<core::SpinQuantumNumber> {
    f.parse().map_err(to_py)
}

fn matrix_rows(m: &core::linalg::CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn report_dict<'py>(py: Python<'py>, r: &core::SqueezingReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean_spin", r.mean_spin.to_vec())?;
    d.set_item("cov", r.cov.iter().map(|row| row.to_vec()).collect::<Vec<_>>())?;
    d.set_item("optimal_angle", r.optimal_angle)?;
    d.set_item("min_variance", r.min_variance)?;
    d.set_item("max_variance", r.max_variance)?;
    d.set_item("chi2", r.chi2)?;
    d.set_item("zeta2", r.zeta2)?;
    d.set_item("xi2", r.xi2)?;
    Ok(d)
}

/// Density matrix of a single spin-F atom.
#[pyclass(name = "QuantumState", module = "pysqueezesim", frozen)]
struct PyQuantumState {
    inner: core::QuantumState,
}

#[pymethods]
impl PyQuantumState {
    /// Coherent spin state along x.
    #[staticmethod]
    fn css_x(f: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::css_x(parse_spin(f)?),
        })
    }

    /// `exp(-i phi Fz) exp(-i theta Fy) |F, m = F>`
    #[staticmethod]
    fn coherent(f: &str, theta: f64, phi: f64) -> PyResult<Self> {
        Ok(Self {
            inner: coherent_spin_state(parse_spin(f)?, theta, phi),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rho(&self) -> Vec<Vec<Complex64>> {
        matrix_rows(self.inner.rho())
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn mean_spin(&self) -> PyResult<Vec<f64>> {
        let ops = core::SpinOperators::for_dim(self.inner.dim()).map_err(to_py)?;
        Ok(spin::mean_spin(&self.inner, &ops).map_err(to_py)?.to_vec())
    }

    /// Squeezing parameters relative to an initial spin length `j`.
    fn squeezing<'py>(&self, py: Python<'py>, j: f64) -> PyResult<Bound<'py, PyDict>> {
        let ops = core::SpinOperators::for_dim(self.inner.dim()).map_err(to_py)?;
        let r = squeezing_report_with(&ops, &self.inner, j).map_err(to_py)?;
        report_dict(py, &r)
    }

    /// Unitary evolution under `alpha (Fz^2 - Fy^2)` for a time giving `alpha_t`.
    fn evolve_tact(&self, alpha_t: f64) -> PyResult<Self> {
        let ops = core::SpinOperators::for_dim(self.inner.dim()).map_err(to_py)?;
        let h = core::tact_hamiltonian(&ops, 1.0);
        Ok(Self {
            inner: core::evolve_unitary(&self.inner, &h, alpha_t).map_err(to_py)?,
        })
    }

    /// Husimi Q on an `n_theta x n_phi` grid, row-major by theta.
    fn husimi(&self, n_theta: usize, n_phi: usize) -> PyResult<Vec<Vec<f64>>> {
        let g = core::husimi(&self.inner, n_theta, n_phi).map_err(to_py)?;
        Ok(g.values.chunks(n_phi).map(<[f64]>::to_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!("QuantumState(dim={}, purity={:.6})", self.inner.dim(), self.inner.purity())
    }
}

#[pyclass(name = "CanonicalMoments", module = "pysqueezesim", frozen)]
struct PyCanonicalMoments {
    inner: core::CanonicalMoments,
}

#[pymethods]
impl PyCanonicalMoments {
    #[new]
    #[pyo3(signature = (var_x, var_p, cov_xp = 0.0, mean_x = 0.0, mean_p = 0.0))]
    fn new(var_x: f64, var_p: f64, cov_xp: f64, mean_x: f64, mean_p: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::CanonicalMoments::new(mean_x, mean_p, var_x, var_p, cov_xp).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn vacuum() -> Self {
        Self {
            inner: core::CanonicalMoments::vacuum(),
        }
    }

    #[getter]
    fn var_x(&self) -> f64 {
        self.inner.var_x
    }

    #[getter]
    fn var_p(&self) -> f64 {
        self.inner.var_p
    }

    #[getter]
    fn cov_xp(&self) -> f64 {
        self.inner.cov_xp
    }

    fn determinant(&self) -> f64 {
        self.inner.determinant()
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!("CanonicalMoments(var_x={}, var_p={}, cov_xp={})", m.var_x, m.var_p, m.cov_xp)
    }
}

/// Probe outcomes `(y_c, y_s)` per shot in vacuum units.
#[pyclass(name = "MeasurementRecord", module = "pysqueezesim", frozen)]
struct PyMeasurementRecord {
    inner: core::MeasurementRecord,
}

#[pymethods]
impl PyMeasurementRecord {
    #[staticmethod]
    fn simulate(moments: &PyCanonicalMoments, kappa2: f64, n_shots: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: simulate_records(&moments.inner, kappa2, n_shots, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn kappa2(&self) -> f64 {
        self.inner.kappa2
    }

    fn __len__(&self) -> usize {
        self.inner.n_shots()
    }

    fn shots(&self) -> Vec<(f64, f64)> {
        self.inner.shots.iter().map(|s| (s[0], s[1])).collect()
    }

    fn correct_covariance<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = core::correct_covariance(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mean_x", c.mean_x)?;
        d.set_item("mean_p", c.mean_p)?;
        d.set_item("var_x", c.var_x)?;
        d.set_item("var_p", c.var_p)?;
        d.set_item("cov_xp", c.cov_xp)?;
        d.set_item("var_x_err", c.var_x_error())?;
        d.set_item("var_p_err", c.var_p_error())?;
        d.set_item("statistical_error", c.statistical_error)?;
        Ok(d)
    }

    /// Maximum-likelihood density matrix in the truncated Fock basis.
    #[pyo3(signature = (dim = 10, max_iter = 5000, tol = 1e-10))]
    fn mle<'py>(&self, py: Python<'py>, dim: usize, max_iter: usize, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let opts = core::MleOptions {
            dim,
            max_iter,
            tol,
            ..core::MleOptions::default()
        };
        let m = py
            .detach(|| core::mle_reconstruct(&self.inner, &opts))
            .map_err(to_py)?;
        let v = core::variances_from_rho(&m.density).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("rho", matrix_rows(m.density.rho()))?;
        d.set_item("populations", m.density.populations())?;
        d.set_item("iterations", m.iterations)?;
        d.set_item("log_likelihood", m.log_likelihood)?;
        d.set_item("truncation_valid", m.density.truncation_valid())?;
        d.set_item("var_x", v.var_x)?;
        d.set_item("var_p", v.var_p)?;
        Ok(d)
    }
}

#[pyclass(name = "ExperimentConfig", module = "pysqueezesim", frozen)]
struct PyExperimentConfig {
    inner: core::ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    /// Parses flat `key = value` text; an empty string gives the defaults.
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: core::ExperimentConfig::parse(text).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    /// Spin state after the Raman pulse of length `t_r` (ms).
    fn state_at(&self, py: Python<'_>, t_r: f64) -> PyResult<PyQuantumState> {
        let p = py.detach(|| sweep_point(&self.inner, t_r)).map_err(to_py)?;
        Ok(PyQuantumState { inner: p.state })
    }

    /// Runs the sweep; returns the result as a JSON-compatible dict.
    fn run_sweep<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| core::run_sweep(&self.inner)).map_err(to_py)?;
        let text = r.to_json().to_string();
        py.import("json")?.call_method1("loads", (text,))
    }
}

/// `(chi2, zeta2, xi2)` minima and their `alpha t` for two-axis countertwisting.
#[pyfunction]
fn tact_optimum<'py>(py: Python<'py>, f: &str) -> PyResult<Bound<'py, PyDict>> {
    let f = parse_spin(f)?;
    let o = py.detach(|| core::tact_optimum(f)).map_err(to_py)?;
    let d = PyDict::new(py);
    for (name, m) in [("chi2", &o.chi2), ("zeta2", &o.zeta2), ("xi2", &o.xi2)] {
        d.set_item(name, (m.value, m.alpha_t))?;
    }
    Ok(d)
}

/// Traceless `(beta/2)(Fz^2 - Fy^2)` and the removed offset.
#[pyfunction]
fn compensated_hamiltonian(f: &str, beta: f64) -> PyResult<(Vec<Vec<Complex64>>, f64)> {
    let ops = core::SpinOperators::new(parse_spin(f)?);
    let c = core::compensated_hamiltonian(&ops, beta);
    Ok((matrix_rows(c.hamiltonian.matrix()), c.offset))
}

#[pymodule]
fn pysqueezesim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantumState>()?;
    m.add_class::<PyCanonicalMoments>()?;
    m.add_class::<PyMeasurementRecord>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(tact_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(compensated_hamiltonian, m)?)?;
    Ok(())
}
