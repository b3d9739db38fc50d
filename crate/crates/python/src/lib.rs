//! Python bindings for the `openrabi` crate.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use openrabi::lindblad::{self, DensityMatrix, EvolveOptions};
use openrabi::model::{BareStateLabel, ParitySector, TruncationConfig};
use openrabi::{jc_analytic, spectrum, vectorized};

fn to_py(e: openrabi::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parity(s: &str) -> PyResult<ParitySector> {
    s.parse().map_err(to_py)
}

fn trunc(n_max: usize) -> PyResult<TruncationConfig> {
    TruncationConfig::new(n_max).map_err(to_py)
}

fn bare(init: &str) -> PyResult<BareStateLabel> {
    init.parse().map_err(to_py)
}

/// Rabi model parameters in units of the cavity frequency.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: openrabi::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (nu_q = 0.8, g = 0.0, kappa_c2 = 0.025, nu_c = 1.0))]
    fn new(nu_q: f64, g: f64, kappa_c2: f64, nu_c: f64) -> PyResult<Self> {
        Ok(Self {
            inner: openrabi::ModelParams::new(nu_c, nu_q, g, kappa_c2).map_err(to_py)?,
        })
    }

    #[getter]
    fn nu_c(&self) -> f64 {
        self.inner.nu_c()
    }

    #[getter]
    fn nu_q(&self) -> f64 {
        self.inner.nu_q()
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g()
    }

    #[getter]
    fn kappa_c2(&self) -> f64 {
        self.inner.kappa_c2()
    }

    fn with_g(&self, g: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_g(g).map_err(to_py)?,
        })
    }

    fn with_kappa_c2(&self, kappa_c2: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_kappa_c2(kappa_c2).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(nu_q={}, g={}, kappa_c2={}, nu_c={})",
            self.inner.nu_q(),
            self.inner.g(),
            self.inner.kappa_c2(),
            self.inner.nu_c()
        )
    }
}

/// Converged real roots of the closed determinant in `window`.
#[pyfunction]
#[pyo3(signature = (params, parity_sector, n_max = 40, window = (-5.0, 10.0)))]
fn closed_eigenfrequencies(
    params: &PyModelParams,
    parity_sector: &str,
    n_max: usize,
    window: (f64, f64),
) -> PyResult<Vec<f64>> {
    let s = spectrum::find_closed_eigenfrequencies(
        &params.inner,
        parity(parity_sector)?,
        trunc(n_max)?,
        window,
    )
    .map_err(to_py)?;
    Ok(s.entries.iter().map(|e| e.omega.re).collect())
}

/// Complex eigenfrequencies of the phenomenological block, by real part.
#[pyfunction]
#[pyo3(signature = (params, parity_sector, n_max = 40))]
fn open_eigenfrequencies(
    params: &PyModelParams,
    parity_sector: &str,
    n_max: usize,
) -> PyResult<Vec<Complex64>> {
    let s =
        spectrum::find_open_eigenfrequencies(&params.inner, parity(parity_sector)?, trunc(n_max)?)
            .map_err(to_py)?;
    Ok(s.omegas())
}

/// Closed-form JC levels of doublet `n` (one value for `n = 0`).
#[pyfunction]
fn jc_eigenfrequencies(params: &PyModelParams, n: usize) -> Vec<Complex64> {
    jc_analytic::jc_eigenfrequencies(&params.inner, n)
        .omegas()
        .into_iter()
        .map(|(_, w)| w)
        .collect()
}

/// Observable time series starting from the bare state `init` ("n,g"/"n,e").
#[pyfunction]
#[pyo3(signature = (params, init, times, n_max = 9))]
fn evolve<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    init: &str,
    times: Vec<f64>,
    n_max: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let rho0 = DensityMatrix::from_bare_state(bare(init)?, trunc(n_max)?).map_err(to_py)?;
    let ev =
        lindblad::evolve(&rho0, &params.inner, &times, EvolveOptions::default()).map_err(to_py)?;
    let s = ev.series;
    let d = PyDict::new(py);
    d.set_item("t", s.t)?;
    d.set_item("photon", s.photon)?;
    d.set_item("qubit_excitation", s.qubit_excitation)?;
    d.set_item("parity", s.parity)?;
    d.set_item("trace", s.trace)?;
    d.set_item("min_eigenvalue", s.min_eigenvalue)?;
    Ok(d)
}

/// Steady-state observables reached from the bare state `init`.
#[pyfunction]
#[pyo3(signature = (params, init, n_max = 9))]
fn steady_state<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    init: &str,
    n_max: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let rho0 = DensityMatrix::from_bare_state(bare(init)?, trunc(n_max)?).map_err(to_py)?;
    let ss = lindblad::steady_state(&params.inner, &rho0).map_err(to_py)?;
    let o = ss.observables();
    let d = PyDict::new(py);
    d.set_item("photon", o.photon)?;
    d.set_item("qubit_excitation", o.qubit_excitation)?;
    d.set_item("parity", o.parity)?;
    d.set_item("kernel_dim", ss.kernel_dim)?;
    d.set_item("residual", ss.generator_residual)?;
    Ok(d)
}

/// `(n_g, weight, omega)` of `init` on the open eigenmodes of its block.
#[pyfunction]
#[pyo3(signature = (params, init, n_max = 9))]
fn eigenmode_weights(
    params: &PyModelParams,
    init: &str,
    n_max: usize,
) -> PyResult<Vec<(usize, f64, Complex64)>> {
    let w =
        lindblad::eigenmode_weights(bare(init)?, &params.inner, trunc(n_max)?).map_err(to_py)?;
    Ok(w.weights
        .iter()
        .map(|m| (m.label.n_g, m.weight, m.omega))
        .collect())
}

/// Doubled-space spectrum per parity sector, keyed "++", "+-", "-+", "--".
#[pyfunction]
#[pyo3(signature = (params, levels = 5))]
fn full_spectrum_by_parity<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    levels: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let t = TruncationConfig::from_levels(levels).map_err(to_py)?;
    let sectors = vectorized::full_spectrum_by_parity(&params.inner, t).map_err(to_py)?;
    let d = PyDict::new(py);
    for s in sectors {
        let key = format!("{}{}", sign(s.p_s), sign(s.p_a));
        d.set_item(key, s.omegas)?;
    }
    Ok(d)
}

fn sign(p: ParitySector) -> char {
    match p {
        ParitySector::Even => '+',
        ParitySector::Odd => '-',
    }
}

/// `(max, mean)` mismatch between `full` and `{ω_m − ω_n*}` of `reduced`.
#[pyfunction]
fn tensor_decomposition_residual(
    full: Vec<Complex64>,
    reduced: Vec<Complex64>,
) -> PyResult<(f64, f64)> {
    let r = vectorized::tensor_decomposition_residual(&full, &reduced).map_err(to_py)?;
    Ok((r.max, r.mean))
}

#[pymodule]
fn _openrabi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", openrabi::VERSION)?;
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(closed_eigenfrequencies, m)?)?;
    m.add_function(wrap_pyfunction!(open_eigenfrequencies, m)?)?;
    m.add_function(wrap_pyfunction!(jc_eigenfrequencies, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(eigenmode_weights, m)?)?;
    m.add_function(wrap_pyfunction!(full_spectrum_by_parity, m)?)?;
    m.add_function(wrap_pyfunction!(tensor_decomposition_residual, m)?)?;
    Ok(())
}
