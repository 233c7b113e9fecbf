//! Python bindings: `import hardbody`.
//!
//! Reports come back as plain dicts, decoded from the same JSON the CLI writes.

use hardbody::approx::{self, GreedyConfig};
use hardbody::bodies::{BodyOracle, HardBodyParams, LiftedHull, LiftedPoint};
use hardbody::centers::{self, ConeVolumeKind, SamplerConfig};
use hardbody::design::{self, DesignConfig, Mode, QuasiOrthogonalSystem};
use hardbody::hardness::{self, CandidatePolytope};
use hardbody::rng::StreamId;
use hardbody::sampling::{self, ChainConfig, Estimate};
use hardbody::solver::Membership;
use hardbody::{polarity, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(hardbody, HardbodyError, PyException);

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_) | Error::DimensionMismatch { .. } | Error::EtaTooLarge(_) | Error::EtaZero => {
            PyValueError::new_err(e.to_string())
        }
        _ => HardbodyError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = hardbody::json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "desk" => Ok(Mode::Desk),
        "paper-faithful" | "paper_faithful" => Ok(Mode::PaperFaithful),
        _ => Err(PyValueError::new_err(format!("mode must be 'desk' or 'paper-faithful', got {mode:?}"))),
    }
}

/// A quasi-orthogonal system `x_1, …, x_m` in `ℝⁿ`.
#[pyclass(name = "QuasiOrthogonalSystem", module = "hardbody", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: QuasiOrthogonalSystem,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    #[pyo3(signature = (n, m, seed, c_config = 3.0, mode = "desk"))]
    fn generate(n: usize, m: usize, seed: u64, c_config: f64, mode: &str) -> PyResult<Self> {
        let cfg = DesignConfig { n, m, c_config, seed, mode: parse_mode(mode)? };
        Ok(Self { inner: design::generate_design(&cfg).map_err(err)? })
    }

    #[staticmethod]
    fn from_vectors(vectors: Vec<Vec<f64>>, delta: f64) -> PyResult<Self> {
        Ok(Self { inner: QuasiOrthogonalSystem::from_vectors(vectors, delta).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: QuasiOrthogonalSystem::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    /// `√n / Δ`
    #[getter]
    fn unit(&self) -> f64 {
        self.inner.unit()
    }

    #[getter]
    fn vectors(&self) -> Vec<Vec<f64>> {
        self.inner.vectors.clone()
    }

    fn verify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &design::verify_design(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("QuasiOrthogonalSystem(n={}, m={}, delta={})", self.inner.n, self.inner.m, self.inner.delta)
    }
}

/// The two-level body `K(η, κ)` in `ℝ^{n+1}` with axis `e₀` first.
#[pyclass(name = "HardBody", module = "hardbody", frozen)]
struct PyHardBody {
    params: HardBodyParams,
    hull: LiftedHull,
}

#[pymethods]
impl PyHardBody {
    #[new]
    #[pyo3(signature = (system, eta, kappa = 1.0))]
    fn new(system: &PySystem, eta: f64, kappa: f64) -> PyResult<Self> {
        let params = HardBodyParams::new(system.inner.clone(), eta, kappa);
        let hull = hardness::hull_for(&params).map_err(err)?;
        Ok(Self { params, hull })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.hull.dim()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.params.eta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.params.kappa
    }

    #[getter]
    fn top(&self) -> f64 {
        self.hull.top
    }

    #[getter]
    fn bottom(&self) -> f64 {
        self.hull.bottom
    }

    fn gauge(&self, y: Vec<f64>) -> PyResult<f64> {
        self.hull.gauge(&y).map_err(err)
    }

    fn level(&self, y: Vec<f64>) -> PyResult<f64> {
        self.hull.level(&y).map_err(err)
    }

    fn support(&self, d: Vec<f64>) -> PyResult<f64> {
        Ok(self.hull.support(&d).map_err(err)?.value)
    }

    /// `"inside"`, `"boundary"` or `"outside"`.
    #[pyo3(signature = (y, tol = 1e-9))]
    fn membership(&self, y: Vec<f64>, tol: f64) -> PyResult<&'static str> {
        Ok(match self.hull.membership(&y, tol).map_err(err)? {
            Membership::Inside => "inside",
            Membership::Boundary => "boundary",
            Membership::Outside => "outside",
        })
    }

    fn chord(&self, y: Vec<f64>, u: Vec<f64>) -> PyResult<(f64, f64)> {
        self.hull.chord(&y, &u).map_err(err)
    }

    fn interior_point(&self) -> Vec<f64> {
        self.hull.interior_point()
    }

    /// The lifted vectors `x⁻_{i,±1}`.
    fn test_directions(&self) -> Vec<Vec<f64>> {
        self.hull.test_directions()
    }

    fn __repr__(&self) -> String {
        format!("HardBody(n={}, eta={}, kappa={})", self.params.system.n, self.params.eta, self.params.kappa)
    }
}

/// A finite vertex list in the lifted space.
#[pyclass(name = "CandidatePolytope", module = "hardbody", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCandidate {
    inner: CandidatePolytope,
}

#[pymethods]
impl PyCandidate {
    #[new]
    #[pyo3(signature = (points, label = "custom"))]
    fn new(points: Vec<Vec<f64>>, label: &str) -> PyResult<Self> {
        Ok(Self { inner: CandidatePolytope::from_points(&points, label).map_err(err)? })
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn support(&self, d: Vec<f64>) -> PyResult<f64> {
        if d.len() != self.inner.dim() {
            return Err(err(Error::DimensionMismatch { expected: self.inner.dim(), got: d.len() }));
        }
        Ok(self.inner.support(&d))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("CandidatePolytope(label={:?}, vertices={})", self.inner.label, self.inner.len())
    }
}

#[pyfunction]
fn separation_report(py: Python<'_>, system: &PySystem, eta: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &hardness::separation_report(&system.inner, eta).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (n, m, kappa = 1.0, c_config = 3.0))]
fn paper_constants(py: Python<'_>, n: usize, m: usize, kappa: f64, c_config: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &hardness::paper_constants(n, m, kappa, c_config).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (polytope, system, kappa = 1.0, claims_sandwich = false))]
fn covering_certificate(
    py: Python<'_>,
    polytope: &PyCandidate,
    system: &PySystem,
    kappa: f64,
    claims_sandwich: bool,
) -> PyResult<Py<PyAny>> {
    to_py(py, &hardness::covering_certificate(&polytope.inner, &system.inner, kappa, claims_sandwich).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (polytope, body, r, n_directions = 1000, seed = 0, tol = 1e-9))]
fn verify_sandwich(
    py: Python<'_>,
    polytope: &PyCandidate,
    body: &PyHardBody,
    r: f64,
    n_directions: usize,
    seed: u64,
    tol: f64,
) -> PyResult<Py<PyAny>> {
    let rep = hardness::verify_sandwich(&polytope.inner, &body.params, &body.hull, r, n_directions, seed, tol).map_err(err)?;
    to_py(py, &rep)
}

/// `(κ, scale)` for the polar shift by `h`.
#[pyfunction]
fn polar_shift(eta: f64, h: f64) -> PyResult<(f64, f64)> {
    let r = polarity::polar_shift(eta, h).map_err(err)?;
    Ok((r.kappa, r.scale))
}

#[pyfunction]
#[pyo3(signature = (system, eta, h, n_points = 10_000, seed = 0, tol = 1e-6))]
fn verify_polar_shift(
    py: Python<'_>,
    system: &PySystem,
    eta: f64,
    h: f64,
    n_points: usize,
    seed: u64,
    tol: f64,
) -> PyResult<Py<PyAny>> {
    to_py(py, &polarity::verify_polar_shift(&system.inner, eta, h, n_points, seed, tol).map_err(err)?)
}

/// Facet and polar-vertex counts of the hull of `points` (origin interior, dimension ≤ 8).
#[pyfunction]
fn dual_count(py: Python<'_>, points: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let p = CandidatePolytope::from_points(&points, "dual").map_err(err)?;
    to_py(py, &polarity::dual_count(&p).map_err(err)?)
}

/// Gaussian mean width of `Q = conv{±x_i}` and of the unit ball, with their ratio.
#[pyfunction]
#[pyo3(signature = (system, n_samples = 10_000, seed = 0))]
fn mean_width_ratio(py: Python<'_>, system: &PySystem, n_samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let q = hardbody::bodies::build_q(&system.inner).map_err(err)?;
    let w = sampling::mean_width(&q, n_samples, seed).map_err(err)?;
    let ball = sampling::gaussian_norm_mean(system.inner.n);
    #[derive(Serialize)]
    struct Out {
        mean_width_q: Estimate,
        mean_width_ball: f64,
        ratio: f64,
    }
    to_py(py, &Out { ratio: w.value / ball, mean_width_q: w, mean_width_ball: ball })
}

#[pyfunction]
#[pyo3(signature = (body, chains = 4, points_per_chain = 2000, seed = 0))]
fn estimate_barycenter(py: Python<'_>, body: &PyHardBody, chains: usize, points_per_chain: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let s = SamplerConfig::for_dim(body.hull.dim(), chains, points_per_chain);
    to_py(py, &centers::estimate_barycenter(&body.hull, &s, seed).map_err(err)?)
}

/// Smaller side fraction of the cut `⟨axis, y⟩ = cut` through `K`.
#[pyfunction]
#[pyo3(signature = (body, axis, cut, chains = 4, points_per_chain = 2000, seed = 0))]
fn grunbaum_check(
    py: Python<'_>,
    body: &PyHardBody,
    axis: Vec<f64>,
    cut: f64,
    chains: usize,
    points_per_chain: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let s = SamplerConfig::for_dim(body.hull.dim(), chains, points_per_chain);
    to_py(py, &centers::grunbaum_check(&body.hull, &axis, cut, &s, seed).map_err(err)?)
}

/// `kind` is `"below_zero"` or `"prime"`; `base_volume` is `|Q₁|` or `|Q_t°|`.
#[pyfunction]
fn cone_volume(kind: &str, eta: f64, base_volume: f64, n: usize) -> PyResult<f64> {
    let kind = match kind {
        "below_zero" => ConeVolumeKind::CMinusBelowZero,
        "prime" => ConeVolumeKind::CMinusPrime,
        _ => return Err(PyValueError::new_err(format!("kind must be 'below_zero' or 'prime', got {kind:?}"))),
    };
    let base = Estimate::from_samples(&[base_volume], StreamId::new(0, "exact"));
    Ok(centers::cone_volume_closed_form(kind, eta, &base, n).map_err(err)?.value)
}

#[pyfunction]
#[pyo3(signature = (body, n_vertices, chains = 4, seed = 0))]
fn random_vertex_polytope(body: &PyHardBody, n_vertices: usize, chains: usize, seed: u64) -> PyResult<PyCandidate> {
    let chain = ChainConfig::for_dim(body.hull.dim());
    Ok(PyCandidate { inner: approx::random_vertex_polytope(&body.hull, n_vertices, &chain, chains, seed).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (body, n_vertices, direction_budget = 2000, seed = 0))]
fn greedy_polytope(body: &PyHardBody, n_vertices: usize, direction_budget: usize, seed: u64) -> PyResult<PyCandidate> {
    let cfg = GreedyConfig::new(n_vertices, direction_budget);
    Ok(PyCandidate { inner: approx::greedy_polytope(&body.hull, &cfg, seed).map_err(err)? })
}

/// `center` is a full lifted point `(y₀, y⊥)`.
#[pyfunction]
#[pyo3(signature = (polytope, body, center, n_directions = 2000, seed = 0))]
fn sandwich_ratio(
    py: Python<'_>,
    polytope: &PyCandidate,
    body: &PyHardBody,
    center: Vec<f64>,
    n_directions: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let c = LiftedPoint::from_slice(&center);
    to_py(py, &approx::sandwich_ratio(&polytope.inner, &body.hull, &c, n_directions, seed).map_err(err)?)
}

/// Runs the command-line interface with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    hardbody::cli::run(std::iter::once("hardbody".to_string()).chain(args))
}

#[pymodule]
#[pyo3(name = "hardbody")]
fn hardbody_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HardbodyError", m.py().get_type::<HardbodyError>())?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyHardBody>()?;
    m.add_class::<PyCandidate>()?;
    m.add_function(wrap_pyfunction!(separation_report, m)?)?;
    m.add_function(wrap_pyfunction!(paper_constants, m)?)?;
    m.add_function(wrap_pyfunction!(covering_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(polar_shift, m)?)?;
    m.add_function(wrap_pyfunction!(verify_polar_shift, m)?)?;
    m.add_function(wrap_pyfunction!(dual_count, m)?)?;
    m.add_function(wrap_pyfunction!(mean_width_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(grunbaum_check, m)?)?;
    m.add_function(wrap_pyfunction!(cone_volume, m)?)?;
    m.add_function(wrap_pyfunction!(random_vertex_polytope, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_polytope, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
