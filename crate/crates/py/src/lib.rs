//! Python bindings: `SignatureSpace`, `System` and `Realization` classes plus
//! the closed-form examples and the corpus generator.
//!
//! Matrices cross the boundary as lists of rows of Python complex numbers;
//! anything indexable that way (nested lists, 2-D numpy arrays) is accepted.
//! Structured reports come back as plain dicts.

use pontryagin::corpus::{blaschke_example, generate, reciprocal_blaschke_example, CorpusSpec};
use pontryagin::dilation::{dilate, DilationKind};
use pontryagin::io::{load_system, save_system};
use pontryagin::julia::julia_embedding;
use pontryagin::kernel::{admissibility_check, boundary_defect_check, negative_squares_estimate, SamplerConfig, Side};
use pontryagin::linalg::{DEFAULT_TOL, RANK_TOL};
use pontryagin::optimality::{
    compare_optimality_tol, defect_function_left, defect_function_right, kulma_check, optimal_realizations,
    sepontulos_check, unitary_similarity, ContainmentConfig, KulmaConfig, SimilarityOutcome, DEFAULT_HORIZON,
    DEFAULT_TRIALS, ENERGY_TOL, SIMILARITY_TOL,
};
use pontryagin::subspaces::{is_controllable, is_minimal, is_observable, is_simple, restrict_by_kind, RestrictionKind};
use pontryagin::{CMat, Colligation, SystemClass, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pontryagin, PontryaginError, PyException, "A computation was rejected or did not converge.");

type Rows = Vec<Vec<C64>>;

fn err(e: pontryagin::Error) -> PyErr {
    PontryaginError::new_err(format!("{}: {e}", e.code()))
}

fn to_mat(rows: &Rows) -> PyResult<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

fn from_mat(m: &CMat) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Serializes a report and hands it to `json.loads`.
fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sampler(seed: u64, rounds: usize, points: usize, radius: Option<f64>) -> SamplerConfig {
    SamplerConfig { rounds, points_per_round: points, radius, seed }
}

/// `C^n` with a Hermitian invertible Gram matrix.
#[pyclass(name = "SignatureSpace", frozen, from_py_object)]
#[derive(Clone)]
struct PySpace(pontryagin::SignatureSpace);

#[pymethods]
impl PySpace {
    /// Canonical space with Gram `diag(I_pos, -I_neg)`.
    #[new]
    #[pyo3(signature = (pos, neg = 0))]
    fn new(pos: usize, neg: usize) -> Self {
        PySpace(pontryagin::SignatureSpace::canonical(pos, neg))
    }

    #[staticmethod]
    fn with_gram(gram: Rows) -> PyResult<Self> {
        Ok(PySpace(pontryagin::SignatureSpace::new(to_mat(&gram)?).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn signature(&self) -> (usize, usize) {
        self.0.signature()
    }

    #[getter]
    fn gram(&self) -> Rows {
        from_mat(self.0.gram())
    }

    fn __repr__(&self) -> String {
        let (p, q) = self.0.signature();
        format!("SignatureSpace(pos={p}, neg={q})")
    }
}

/// Transfer-function data `(A, B, C, D)` without a state Gram.
#[pyclass(name = "Realization", frozen)]
struct PyRealization(pontryagin::Realization);

#[pymethods]
impl PyRealization {
    #[getter(A)]
    fn a(&self) -> Rows {
        from_mat(&self.0.a)
    }
    #[getter(B)]
    fn b(&self) -> Rows {
        from_mat(&self.0.b)
    }
    #[getter(C)]
    fn c(&self) -> Rows {
        from_mat(&self.0.c)
    }
    #[getter(D)]
    fn d(&self) -> Rows {
        from_mat(&self.0.d)
    }

    fn transfer(&self, z: C64) -> PyResult<Rows> {
        Ok(from_mat(&self.0.eval(z).map_err(err)?))
    }
}

/// A system `(A, B, C, D)` with Pontryagin state, input and output spaces.
#[pyclass(name = "System", frozen, from_py_object)]
#[derive(Clone)]
struct PySystem(Colligation);

fn wrap(s: Colligation) -> PySystem {
    PySystem(s)
}

#[pymethods]
impl PySystem {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(state: PySpace, input: PySpace, output: PySpace, a: Rows, b: Rows, c: Rows, d: Rows) -> PyResult<Self> {
        let s = Colligation::new(state.0, input.0, output.0, to_mat(&a)?, to_mat(&b)?, to_mat(&c)?, to_mat(&d)?)
            .map_err(err)?;
        Ok(PySystem(s))
    }

    /// Parses a system file.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySystem(load_system(text).map_err(err)?.0))
    }

    fn to_json(&self) -> String {
        save_system(&self.0, None)
    }

    #[getter]
    fn state(&self) -> PySpace {
        PySpace(self.0.state().clone())
    }
    #[getter]
    fn input(&self) -> PySpace {
        PySpace(self.0.input().clone())
    }
    #[getter]
    fn output(&self) -> PySpace {
        PySpace(self.0.output().clone())
    }
    #[getter(A)]
    fn a(&self) -> Rows {
        from_mat(self.0.a())
    }
    #[getter(B)]
    fn b(&self) -> Rows {
        from_mat(self.0.b())
    }
    #[getter(C)]
    fn c(&self) -> Rows {
        from_mat(self.0.c())
    }
    #[getter(D)]
    fn d(&self) -> Rows {
        from_mat(self.0.d())
    }

    /// Negative index of the state space.
    #[getter]
    fn kappa(&self) -> usize {
        self.0.kappa()
    }

    /// One of `conservative`, `isometric`, `co-isometric`, `passive`, `not passive`.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn classify(&self, tol: f64) -> &'static str {
        self.0.system_class(tol).as_str()
    }

    /// Full classification of the system operator as a dict.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn operator_class<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0.classify_system(tol))
    }

    fn is_controllable(&self) -> bool {
        is_controllable(&self.0, RANK_TOL)
    }
    fn is_observable(&self) -> bool {
        is_observable(&self.0, RANK_TOL)
    }
    fn is_simple(&self) -> bool {
        is_simple(&self.0, RANK_TOL)
    }
    fn is_minimal(&self) -> bool {
        is_minimal(&self.0, RANK_TOL)
    }

    fn transfer(&self, z: C64) -> PyResult<Rows> {
        Ok(from_mat(&self.0.transfer_eval(z).map_err(err)?))
    }

    /// `[D, CB, CAB, ...]` up to index `n`.
    #[pyo3(signature = (n = 8))]
    fn markov(&self, n: usize) -> Vec<Rows> {
        self.0.markov_parameters(n).0.iter().map(from_mat).collect()
    }

    fn dual(&self) -> PySystem {
        wrap(self.0.dual())
    }

    /// Basis change `x = W x'`; the transfer function is unchanged.
    fn change_basis(&self, w: Rows) -> PyResult<PySystem> {
        Ok(wrap(self.0.change_basis(&to_mat(&w)?).map_err(err)?))
    }

    /// `which` is one of `controllable`, `observable`, `simple`, `min1`, `min2`.
    fn restrict(&self, which: &str) -> PyResult<PySystem> {
        let kind = match which {
            "controllable" => RestrictionKind::Controllable,
            "observable" => RestrictionKind::Observable,
            "simple" => RestrictionKind::Simple,
            "min1" => RestrictionKind::MinimalFirst,
            "min2" => RestrictionKind::MinimalSecond,
            other => return Err(PyValueError::new_err(format!("unknown restriction {other:?}"))),
        };
        Ok(wrap(restrict_by_kind(&self.0, kind, RANK_TOL).map_err(err)?))
    }

    /// The system extended by its defect channels; its system operator is unitary.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn julia_embed(&self, tol: f64) -> PyResult<PySystem> {
        Ok(wrap(julia_embedding(&self.0, tol).map_err(err)?.extended))
    }

    /// `kind` is one of `conservative`, `isometric`, `coisometric`.
    #[pyo3(signature = (kind = "conservative", depth = 8, tol = DEFAULT_TOL))]
    fn dilate(&self, kind: &str, depth: usize, tol: f64) -> PyResult<PySystem> {
        let k = match kind {
            "conservative" => DilationKind::Conservative,
            "isometric" => DilationKind::Isometric,
            "coisometric" => DilationKind::Coisometric,
            other => return Err(PyValueError::new_err(format!("unknown dilation kind {other:?}"))),
        };
        Ok(wrap(dilate(&self.0, k, depth, tol).map_err(err)?.dilated))
    }

    #[pyo3(signature = (seed = 0, rounds = 10, points = 8, radius = None))]
    fn negative_squares<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        rounds: usize,
        points: usize,
        radius: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let est = negative_squares_estimate(&self.0, &sampler(seed, rounds, points, radius)).map_err(err)?;
        to_dict(py, &est)
    }

    #[pyo3(signature = (seed = 0, rounds = 10, points = 8, radius = None))]
    fn admissibility<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        rounds: usize,
        points: usize,
        radius: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let rep = admissibility_check(&self.0, &sampler(seed, rounds, points, radius)).map_err(err)?;
        to_dict(py, &rep)
    }

    /// Sampled energy order against another realization of the same transfer function:
    /// one of `equal`, `le`, `ge`, `incomparable`.
    #[pyo3(signature = (other, trials = DEFAULT_TRIALS, horizon = DEFAULT_HORIZON, seed = 0, tol = ENERGY_TOL))]
    fn compare_energy(
        &self,
        other: &PySystem,
        trials: usize,
        horizon: usize,
        seed: u64,
        tol: f64,
    ) -> PyResult<&'static str> {
        let cmp = compare_optimality_tol(&self.0, &other.0, trials, horizon, seed, tol).map_err(err)?;
        Ok(cmp.order.as_str())
    }

    /// The unitary intertwiner as rows, or `None` when the systems are not unitarily similar.
    #[pyo3(signature = (other, tol = SIMILARITY_TOL))]
    fn similarity(&self, other: &PySystem, tol: f64) -> PyResult<Option<Rows>> {
        Ok(match unitary_similarity(&self.0, &other.0, tol).map_err(err)? {
            SimilarityOutcome::Similar(cert) => Some(from_mat(&cert.u)),
            SimilarityOutcome::NotSimilar(_) => None,
        })
    }

    /// The optimal and star-optimal minimal passive realizations.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn optimal_realizations(&self, tol: f64) -> PyResult<(PySystem, PySystem)> {
        let or = optimal_realizations(&self.0, tol).map_err(err)?;
        Ok((wrap(or.optimal), wrap(or.star_optimal)))
    }

    /// Realization of the right or left defect function; `None` when it vanishes identically.
    #[pyo3(signature = (side, tol = DEFAULT_TOL))]
    fn defect_function(&self, side: &str, tol: f64) -> PyResult<Option<PyRealization>> {
        let f = match side {
            "right" => defect_function_right(&self.0, tol),
            "left" => defect_function_left(&self.0, tol),
            other => return Err(PyValueError::new_err(format!("unknown side {other:?}"))),
        }
        .map_err(err)?;
        Ok((f.width() > 0).then_some(PyRealization(f.realization)))
    }

    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn sepontulos<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let rep = sepontulos_check(&self.0, &ContainmentConfig::default(), tol).map_err(err)?;
        let dict = to_dict(py, &rep)?;
        dict.set_item("all_agree", rep.all_agree())?;
        Ok(dict)
    }

    #[pyo3(signature = (seed = 0, tol = DEFAULT_TOL))]
    fn kulma<'py>(&self, py: Python<'py>, seed: u64, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = KulmaConfig { sampler: sampler(seed, 10, 8, None), similarity_tol: SIMILARITY_TOL, seed };
        to_dict(py, &kulma_check(&self.0, &cfg, tol).map_err(err)?)
    }

    /// Defect inequalities on a grid of the unit circle; Hilbert channels only.
    #[pyo3(signature = (grid = 256, tol = DEFAULT_TOL))]
    fn boundary_check<'py>(&self, py: Python<'py>, grid: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let phi = defect_function_right(&self.0, tol).map_err(err)?;
        let psi = defect_function_left(&self.0, tol).map_err(err)?;
        let right =
            boundary_defect_check(&self.0, (phi.width() > 0).then_some(&phi.realization), Side::Right, grid, tol)
                .map_err(err)?;
        let left = boundary_defect_check(&self.0, (psi.width() > 0).then_some(&psi.realization), Side::Left, grid, tol)
            .map_err(err)?;
        to_dict(py, &serde_json::json!({ "passed": right.passed && left.passed, "right": right, "left": left }))
    }

    fn __eq__(&self, other: &PySystem) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let (p, q) = self.0.state().signature();
        format!(
            "System(state=({p}, {q}), input={}, output={}, class={})",
            self.0.input_dim(),
            self.0.output_dim(),
            SystemClass::as_str(&self.0.system_class(DEFAULT_TOL))
        )
    }
}

/// Conservative system with transfer function `(z - a) / (1 - a z)`, `|a| < 1`.
#[pyfunction]
fn blaschke(a: f64) -> PyResult<PySystem> {
    Ok(wrap(blaschke_example(a).map_err(err)?))
}

/// Conservative system on a one-dimensional anti-Hilbert state with transfer function `(1 - a z) / (z - a)`.
#[pyfunction]
fn reciprocal_blaschke(a: f64) -> PyResult<PySystem> {
    Ok(wrap(reciprocal_blaschke_example(a).map_err(err)?))
}

/// Passive, non-conservative system on a state of signature `(1, 1)` whose defect functions are both nonzero.
#[pyfunction]
fn mixed_example() -> PySystem {
    wrap(pontryagin::corpus::mixed_example())
}

/// Seeded corpus from a JSON spec such as
/// `{"seed": 1, "state": [2, 1], "channel": [1, 0], "count": 5, "target": "passive"}`.
#[pyfunction]
fn generate_corpus(spec: &str) -> PyResult<Vec<PySystem>> {
    let spec: CorpusSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(generate(&spec).into_iter().map(wrap).collect())
}

#[pymodule]
#[pyo3(name = "pontryagin")]
fn pontryagin_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyRealization>()?;
    m.add_function(wrap_pyfunction!(blaschke, m)?)?;
    m.add_function(wrap_pyfunction!(reciprocal_blaschke, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_example, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add("PontryaginError", m.py().get_type::<PontryaginError>())?;
    Ok(())
}
