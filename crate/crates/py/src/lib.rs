//! Python bindings for `levy-fk`.
//!
//! Structured results (estimates, extremals, sweep reports) come back as
//! plain dictionaries; rate functions and boundary data are passed as
//! dictionaries with a `family` key, exactly as in the TOML configuration.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use levy_fk::asymptotics::{self, PrefactorDirection, PrefactorSpec, SweepSource, DEFAULT_LADDER};
use levy_fk::config::RunConfig;
use levy_fk::fk::{self, BoundaryData, Direction, McConfig, ProblemSpec, RateFunction};
use levy_fk::levy::{self, Atom, JumpMeasure, Regime};
use levy_fk::pide::{self, GridParams, GridSolution};
use levy_fk::variational::{self, BoundaryTerm, Hamiltonian, Lagrangian};
use levy_fk::{run, verify, Error};

create_exception!(levy_fk_py, LevyFkError, PyException);
create_exception!(levy_fk_py, ResolutionError, LevyFkError);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Argument(_) => PyValueError::new_err(e.to_string()),
        Error::Resolution(_) => ResolutionError::new_err(e.to_string()),
        _ => LevyFkError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| LevyFkError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let text: String = PyModule::import(obj.py(), "json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn mc(n_paths: usize, dt: f64, seed: u64) -> McConfig {
    McConfig::new(n_paths, dt, seed)
}

/// Levy triplet, optionally in the scaled regime.
#[pyclass(name = "LevyModel", module = "levy_fk_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLevyModel {
    inner: levy::LevyModel,
}

#[pymethods]
impl PyLevyModel {
    #[new]
    #[pyo3(signature = (drift=0.0, sigma2=0.0, atoms=None, hbar=None))]
    fn new(drift: f64, sigma2: f64, atoms: Option<Vec<(f64, f64)>>, hbar: Option<f64>) -> PyResult<Self> {
        let jumps = match atoms {
            None => JumpMeasure::None,
            Some(a) => JumpMeasure::FiniteAtomic(a.into_iter().map(|(size, rate)| Atom { size, rate }).collect()),
        };
        let regime = hbar.map_or(Regime::Unscaled, |hbar| Regime::Scaled { hbar });
        let inner = levy::LevyModel::new(drift, sigma2, jumps, regime).map_err(to_py_err)?;
        Ok(PyLevyModel { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (sigma2=1.0))]
    fn brownian(sigma2: f64) -> PyResult<Self> {
        let inner = levy::LevyModel::brownian(sigma2);
        inner.validate().map_err(to_py_err)?;
        Ok(PyLevyModel { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, mass=1.0))]
    fn two_point(alpha: f64, mass: f64) -> PyResult<Self> {
        let inner = levy::LevyModel::two_point(alpha, mass);
        inner.validate().map_err(to_py_err)?;
        Ok(PyLevyModel { inner })
    }

    #[staticmethod]
    fn gamma_subordinator() -> Self {
        PyLevyModel { inner: levy::LevyModel::gamma_subordinator() }
    }

    fn scaled(&self, hbar: f64) -> PyResult<Self> {
        let inner = self.inner.clone().scaled(hbar);
        inner.validate().map_err(to_py_err)?;
        Ok(PyLevyModel { inner })
    }

    fn unscaled(&self) -> Self {
        PyLevyModel { inner: self.inner.clone().unscaled() }
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.inner.hbar()
    }

    #[getter]
    fn is_subordinator(&self) -> bool {
        self.inner.is_subordinator()
    }

    /// Real part of the characteristic exponent at `x`.
    fn characteristic_exponent(&self, x: f64) -> PyResult<f64> {
        levy::characteristic_exponent(&self.inner, x).map_err(to_py_err)
    }

    fn h0(&self, x: f64) -> PyResult<f64> {
        let h = Hamiltonian::new(&self.inner).map_err(to_py_err)?;
        variational::hamiltonian_h0(&h, x).map_err(to_py_err)
    }

    /// Legendre transform `L0(u)`; returns `(value, argmax)`.
    fn l0(&self, u: f64) -> PyResult<(f64, f64)> {
        let l = Lagrangian::new(&self.inner).map_err(to_py_err)?;
        let r = variational::legendre_l0(&l, u).map_err(to_py_err)?;
        Ok((r.value, r.argmax))
    }

    /// Empirical moments `E|X_t|^m` over `times`.
    #[pyo3(signature = (times, m, n_paths=10_000, seed=0))]
    fn moments(&self, py: Python<'_>, times: Vec<f64>, m: u32, n_paths: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let model = self.inner.clone();
        let r = py.detach(|| levy::empirical_moments(&model, &times, m, n_paths, seed)).map_err(to_py_err)?;
        to_py(py, &r)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("LevyModel({:?})", self.inner)
    }
}

/// Stored time levels of a grid solve.
#[pyclass(name = "GridSolution", module = "levy_fk_py", frozen, skip_from_py_object)]
struct PyGridSolution {
    inner: GridSolution,
}

#[pymethods]
impl PyGridSolution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.grid.points()
    }

    /// Row-major values, one row per stored time.
    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.clone()
    }

    #[getter]
    fn positive(&self) -> bool {
        self.inner.positive
    }

    fn value_at(&self, t: f64, p: f64) -> PyResult<f64> {
        self.inner.value_at(t, p).map_err(to_py_err)
    }
}

/// Model, rate `U`, data `g`, horizon and direction of one Feynman-Kac problem.
#[pyclass(name = "Problem", module = "levy_fk_py", frozen, skip_from_py_object)]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (model, rate, data, horizon=1.0, direction="forward"))]
    fn new(model: &PyLevyModel, rate: &Bound<'_, PyAny>, data: &Bound<'_, PyAny>, horizon: f64, direction: &str) -> PyResult<Self> {
        let rate: RateFunction = from_py(rate, "rate")?;
        let data: BoundaryData = from_py(data, "data")?;
        let direction = match direction {
            "forward" => Direction::ForwardFromInitial,
            "backward" => Direction::BackwardFromTerminal,
            other => return Err(PyValueError::new_err(format!("direction must be 'forward' or 'backward', got '{other}'"))),
        };
        let inner = ProblemSpec::new(model.inner.clone(), rate, data, horizon, direction).map_err(to_py_err)?;
        Ok(PyProblem { inner })
    }

    #[pyo3(signature = (t, p, n_paths=10_000, dt=1e-3, seed=0))]
    fn fk_estimate(&self, py: Python<'_>, t: f64, p: f64, n_paths: usize, dt: f64, seed: u64) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| fk::fk_estimate(&self.inner, t, p, &mc(n_paths, dt, seed))).map_err(to_py_err)?;
        to_py(py, &r)
    }

    #[pyo3(signature = (t, points, n_paths=10_000, dt=1e-3, seed=0))]
    fn fk_estimate_many(
        &self,
        py: Python<'_>,
        t: f64,
        points: Vec<f64>,
        n_paths: usize,
        dt: f64,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| fk::fk_estimate_many(&self.inner, t, &points, &mc(n_paths, dt, seed))).map_err(to_py_err)?;
        to_py(py, &r)
    }

    /// Scaled models are checked for grid resolution first.
    #[pyo3(signature = (half_width, n, dt, store_every=1, smoothing_steps=2))]
    fn solve_pide(
        &self,
        py: Python<'_>,
        half_width: f64,
        n: usize,
        dt: f64,
        store_every: usize,
        smoothing_steps: usize,
    ) -> PyResult<PyGridSolution> {
        let params = GridParams { half_width, n, dt, store_every, smoothing_steps };
        let spec = &self.inner;
        let inner = py
            .detach(|| match spec.model.is_scaled() {
                true => pide::solve_pide_scaled(spec, spec.hbar(), &params),
                false => pide::solve_pide(spec, &params),
            })
            .map_err(to_py_err)?;
        Ok(PyGridSolution { inner })
    }

    /// Finite-difference drift `hbar u_p / u` at scale `hbar`.
    #[pyo3(signature = (hbar, t, p, delta=1e-3, n_paths=10_000, dt=1e-3, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn drift_estimate(
        &self,
        py: Python<'_>,
        hbar: f64,
        t: f64,
        p: f64,
        delta: f64,
        n_paths: usize,
        dt: f64,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let r = py
            .detach(|| fk::drift_estimate(&self.inner, hbar, t, p, delta, &mc(n_paths, dt, seed)))
            .map_err(to_py_err)?;
        to_py(py, &r)
    }

    /// Fits `ln u` against `1/hbar` over a grid-solved ladder.
    #[pyo3(signature = (p, t, half_width, n, dt, hbars=None))]
    #[allow(clippy::too_many_arguments)]
    fn hbar_sweep(
        &self,
        py: Python<'_>,
        p: f64,
        t: f64,
        half_width: f64,
        n: usize,
        dt: f64,
        hbars: Option<Vec<f64>>,
    ) -> PyResult<Py<PyAny>> {
        let hbars = hbars.unwrap_or_else(|| DEFAULT_LADDER.to_vec());
        let source = SweepSource::Pide { grid: GridParams::new(half_width, n, dt) };
        let r = py.detach(|| asymptotics::hbar_sweep(&self.inner, p, t, &hbars, &source)).map_err(to_py_err)?;
        to_py(py, &r)
    }

    /// Drift prediction in the momentum representation.
    fn drift_prediction(&self, py: Python<'_>, p: f64, t: f64) -> PyResult<Py<PyAny>> {
        let s = &self.inner;
        let r = asymptotics::drift_prediction_momentum(&s.model.clone().unscaled(), &s.rate, p, t, s.data.boundary_term())
            .map_err(to_py_err)?;
        to_py(py, &r)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }
}

fn boundary(kappa: f64) -> BoundaryTerm {
    BoundaryTerm::Square { kappa }
}

/// Configuration-space extremal for potential `v`, end penalty `kappa y^2`.
#[pyfunction]
#[pyo3(signature = (v, q, t0, t1, kappa=0.5))]
fn solve_el_config(py: Python<'_>, v: &Bound<'_, PyAny>, q: f64, t0: f64, t1: f64, kappa: f64) -> PyResult<Py<PyAny>> {
    let v: RateFunction = from_py(v, "v")?;
    let r = variational::solve_el_config(&v, q, t0, t1, boundary(kappa)).map_err(to_py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (model, u, p, t0, t1, kappa=0.5))]
fn solve_el_momentum(
    py: Python<'_>,
    model: &PyLevyModel,
    u: &Bound<'_, PyAny>,
    p: f64,
    t0: f64,
    t1: f64,
    kappa: f64,
) -> PyResult<Py<PyAny>> {
    let u: RateFunction = from_py(u, "u")?;
    let l = Lagrangian::new(&model.inner).map_err(to_py_err)?;
    let r = variational::solve_el_momentum(&l, &u, p, t0, t1, boundary(kappa)).map_err(to_py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (alpha, p, t, t1=1.0))]
fn solve_el_jump(py: Python<'_>, alpha: f64, p: f64, t: f64, t1: f64) -> PyResult<Py<PyAny>> {
    let r = variational::solve_el_jump(alpha, p, t, t1).map_err(to_py_err)?;
    to_py(py, &r)
}

fn prefactor_spec(t: f64, direction: &str) -> PyResult<PrefactorSpec> {
    let direction = match direction {
        "forward" => PrefactorDirection::Forward,
        "backward" => PrefactorDirection::Backward,
        other => return Err(PyValueError::new_err(format!("direction must be 'forward' or 'backward', got '{other}'"))),
    };
    Ok(PrefactorSpec { direction, t })
}

/// `F` in closed form and by ODE integration, with `K = (2 pi F)^(-1/2)`.
#[pyfunction]
#[pyo3(signature = (t, direction="forward"))]
fn prefactor_f(py: Python<'_>, t: f64, direction: &str) -> PyResult<Py<PyAny>> {
    let r = asymptotics::prefactor_f(&prefactor_spec(t, direction)?).map_err(to_py_err)?;
    to_py(py, &r)
}

/// Wiener-functional estimate of the same prefactor.
#[pyfunction]
#[pyo3(signature = (t, direction="forward", n_paths=10_000, dt=1e-3, seed=0))]
fn prefactor_mc(py: Python<'_>, t: f64, direction: &str, n_paths: usize, dt: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let spec = prefactor_spec(t, direction)?;
    let r = py.detach(|| asymptotics::prefactor_mc(&spec, &mc(n_paths, dt, seed))).map_err(to_py_err)?;
    to_py(py, &r)
}

#[pyfunction]
fn cameron_martin(omega: f64, beta: f64, tau: f64) -> f64 {
    asymptotics::cameron_martin(omega, beta, tau)
}

/// Executes a TOML run configuration without writing files; returns
/// `(method, body, summary)`.
#[pyfunction]
fn run_config(py: Python<'_>, toml: &str) -> PyResult<(String, String, Py<PyAny>)> {
    let mut cfg = RunConfig::parse_toml(toml).map_err(to_py_err)?;
    cfg.output.path = None;
    let cfg = run::resolve(cfg, &run::Overrides::default()).map_err(to_py_err)?;
    let artifact = py.detach(|| run::execute(&cfg)).map_err(to_py_err)?;
    let body = String::from_utf8(artifact.body).map_err(|_| PyValueError::new_err("binary output; use format csv or json"))?;
    Ok((artifact.method, body, to_py(py, &artifact.summary)?))
}

/// Runs one acceptance criterion by number.
#[pyfunction]
fn verify_criterion(py: Python<'_>, id: u32) -> PyResult<Py<PyAny>> {
    let o = py.detach(|| verify::run_criterion(id));
    to_py(py, &o)
}

#[pymodule]
fn levy_fk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LevyFkError", m.py().get_type::<LevyFkError>())?;
    m.add("ResolutionError", m.py().get_type::<ResolutionError>())?;
    m.add("DEFAULT_LADDER", DEFAULT_LADDER.to_vec())?;
    m.add_class::<PyLevyModel>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyGridSolution>()?;
    m.add_function(wrap_pyfunction!(solve_el_config, m)?)?;
    m.add_function(wrap_pyfunction!(solve_el_momentum, m)?)?;
    m.add_function(wrap_pyfunction!(solve_el_jump, m)?)?;
    m.add_function(wrap_pyfunction!(prefactor_f, m)?)?;
    m.add_function(wrap_pyfunction!(prefactor_mc, m)?)?;
    m.add_function(wrap_pyfunction!(cameron_martin, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(verify_criterion, m)?)?;
    Ok(())
}
