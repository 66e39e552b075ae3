//! Python bindings: kernels, paths, local time, closed forms, `G_{eps,a}`
//! and the experiment runners.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use localwick::closedform::{self, covariances, SpectralBasis};
use localwick::functionals::{self as fx, ExpFunctional, KProfile};
use localwick::harness::config::ExperimentConfig;
use localwick::harness::experiments;
use localwick::kernels::{KernelKind, MollifierSpec};
use localwick::localtime::{self as lt, LocalTimeMethod};
use localwick::paths::{self, stream_rng, Grid};

fn err(e: localwick::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid_for(values: &[f64]) -> PyResult<Grid> {
    if values.len() < 3 {
        return Err(PyValueError::new_err("a path needs at least 3 values"));
    }
    Grid::new(values.len() - 1).map_err(err)
}

fn parse_method(method: &str) -> PyResult<LocalTimeMethod> {
    match method {
        "occupation" => Ok(LocalTimeMethod::Occupation),
        "tanaka" => Ok(LocalTimeMethod::Tanaka),
        _ => Err(PyValueError::new_err(format!("unknown local time method `{method}`"))),
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Mollifier {
    inner: localwick::kernels::Mollifier,
}

#[pymethods]
impl Mollifier {
    #[new]
    #[pyo3(signature = (epsilon, kernel = "bump"))]
    fn new(epsilon: f64, kernel: &str) -> PyResult<Self> {
        let kind = match kernel {
            "bump" => KernelKind::Bump,
            "epanechnikov" => KernelKind::Epanechnikov,
            _ => return Err(PyValueError::new_err(format!("unknown kernel `{kernel}`"))),
        };
        Ok(Self { inner: localwick::kernels::Mollifier::new(MollifierSpec::new(kind, epsilon)).map_err(err)? })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn density(&self, x: f64) -> f64 {
        self.inner.density(x)
    }

    fn c_eps(&self, theta: f64) -> PyResult<f64> {
        self.inner.c_eps(theta).map_err(err)
    }

    fn mollify(&self, values: Vec<f64>, theta: f64) -> PyResult<f64> {
        self.inner.mollify(&values, &grid_for(&values)?, theta).map_err(err)
    }

    fn mollified_derivative(&self, values: Vec<f64>, theta: f64) -> PyResult<f64> {
        self.inner.mollified_derivative(&values, &grid_for(&values)?, theta).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Mollifier(epsilon={}, kernel={:?})", self.inner.epsilon(), self.inner.spec().kernel)
    }
}

/// Test function `h`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct TestFunction {
    inner: fx::TestFunction,
}

#[pymethods]
impl TestFunction {
    #[staticmethod]
    #[pyo3(signature = (lo, hi, amp = 1.0))]
    fn bump(lo: f64, hi: f64, amp: f64) -> PyResult<Self> {
        let inner = fx::TestFunction::Bump { lo, hi, amp };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (lo, hi, amp = 1.0))]
    fn poly(lo: f64, hi: f64, amp: f64) -> PyResult<Self> {
        let inner = fx::TestFunction::Poly { lo, hi, amp };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zero() -> Self {
        Self { inner: fx::TestFunction::Zero }
    }

    fn __call__(&self, theta: f64) -> f64 {
        self.inner.value(theta)
    }

    fn d2(&self, theta: f64) -> f64 {
        self.inner.d2(theta)
    }
}

/// Direction `k` of the exponential functional `Psi_k = exp <., k>`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Direction {
    inner: ExpFunctional,
}

#[pymethods]
impl Direction {
    #[staticmethod]
    fn zero() -> PyResult<Self> {
        Self::make(KProfile::Zero)
    }

    #[staticmethod]
    fn constant(value: f64) -> PyResult<Self> {
        Self::make(KProfile::Constant { value })
    }

    #[staticmethod]
    #[pyo3(signature = (index, scale = 1.0))]
    fn eigen(index: usize, scale: f64) -> PyResult<Self> {
        Self::make(KProfile::Eigen { index, scale })
    }

    #[staticmethod]
    fn cosine(freq: f64, amp: f64) -> PyResult<Self> {
        Self::make(KProfile::Cosine { freq, amp })
    }

    fn __call__(&self, theta: f64) -> f64 {
        self.inner.k(theta)
    }

    /// `<Qk, k>`.
    fn qk_norm(&self) -> f64 {
        self.inner.qk_norm()
    }
}

impl Direction {
    fn make(p: KProfile) -> PyResult<Self> {
        Ok(Self { inner: ExpFunctional::new(p).map_err(err)? })
    }
}

/// Brownian path on `n` uniform intervals of `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (n, seed, stream = 0))]
fn sample_bm(n: usize, seed: u64, stream: u64) -> PyResult<Vec<f64>> {
    let grid = Grid::new(n).map_err(err)?;
    Ok(paths::sample_bm(&grid, &mut stream_rng(seed, stream)).into_values())
}

/// Local time curve at level `a` on the path's grid.
#[pyfunction]
#[pyo3(signature = (values, a, method = "occupation", delta = None))]
fn local_time(values: Vec<f64>, a: f64, method: &str, delta: Option<f64>) -> PyResult<Vec<f64>> {
    let grid = grid_for(&values)?;
    let d = delta.unwrap_or_else(|| lt::default_bandwidth(&grid));
    Ok(lt::localtime(&values, &grid, a, parse_method(method)?, d).map_err(err)?.values().to_vec())
}

/// `G_{eps,a}` of a path.
#[pyfunction]
#[pyo3(signature = (values, h, a, mollifier, method = "occupation", delta = None))]
fn g_eps_a(values: Vec<f64>, h: &TestFunction, a: f64, mollifier: &Mollifier, method: &str, delta: Option<f64>) -> PyResult<f64> {
    let grid = grid_for(&values)?;
    let d = delta.unwrap_or_else(|| lt::default_bandwidth(&grid));
    fx::g_eps_a(&values, &grid, &h.inner, a, &mollifier.inner, parse_method(method)?, d).map_err(err)
}

#[pyfunction]
fn mean_g(h: &TestFunction, a: f64) -> f64 {
    closedform::mean_g(&h.inner, a)
}

#[pyfunction]
fn laplace_rhs(h: &TestFunction, k: &Direction, a: f64) -> f64 {
    closedform::laplace_rhs(&h.inner, &k.inner, a)
}

#[pyfunction]
fn ibp_lhs(h: &TestFunction, k: &Direction, a: f64) -> f64 {
    closedform::ibp_lhs_sign(&h.inner, &k.inner, a)
}

#[pyfunction]
fn ibp_rhs(h: &TestFunction, k: &Direction, a: f64) -> f64 {
    closedform::ibp_rhs_sign(&h.inner, &k.inner, a)
}

#[pyfunction]
fn quadratic_rhs(k: &Direction) -> f64 {
    closedform::quadratic_rhs(&k.inner)
}

/// `q_t(x, y)` with `n_modes` terms.
#[pyfunction]
#[pyo3(signature = (t, x, y, n_modes = 512))]
fn q_t(t: f64, x: f64, y: f64, n_modes: usize) -> PyResult<f64> {
    let basis = SpectralBasis::new(n_modes).map_err(err)?;
    Ok(covariances(t, &basis).map_err(err)?.q_t_series(x, y))
}

/// Runs one experiment (`mean`, `laplace`, `ibp`, `rbm`, `quadratic`,
/// `decay`, `expc`, `localtime-bench`) and returns its report as JSON.
#[pyfunction]
#[pyo3(signature = (name, overrides = Vec::new()))]
fn run_experiment(py: Python<'_>, name: &str, overrides: Vec<String>) -> PyResult<String> {
    let cfg = ExperimentConfig::load(None, &overrides).map_err(err)?;
    let runner = match name {
        "mean" => experiments::run_mean_experiment,
        "laplace" => experiments::run_laplace_experiment,
        "ibp" => experiments::run_ibp_experiment,
        "rbm" => experiments::run_rbm_experiment,
        "quadratic" => experiments::run_quadratic_experiment,
        "decay" => experiments::run_decay_study,
        "expc" => experiments::run_expc_experiment,
        "localtime-bench" => experiments::run_localtime_bench,
        _ => return Err(PyValueError::new_err(format!("unknown experiment `{name}`"))),
    };
    let rep = py.detach(|| runner(&cfg)).map_err(err)?;
    serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "localwick")]
fn localwick_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mollifier>()?;
    m.add_class::<TestFunction>()?;
    m.add_class::<Direction>()?;
    m.add_function(wrap_pyfunction!(sample_bm, m)?)?;
    m.add_function(wrap_pyfunction!(local_time, m)?)?;
    m.add_function(wrap_pyfunction!(g_eps_a, m)?)?;
    m.add_function(wrap_pyfunction!(mean_g, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(ibp_lhs, m)?)?;
    m.add_function(wrap_pyfunction!(ibp_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(q_t, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
