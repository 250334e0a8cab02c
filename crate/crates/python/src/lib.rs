//! Python bindings: sampling, correlation estimates, Gaussian coupling,
//! partition algebra and reference values.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sinebeta_core::carousel::{self, FreezeCriterion};
use sinebeta_core::combinatorics;
use sinebeta_core::correlation::{self, CarouselSampler, SeedPlan};
use sinebeta_core::coupling::{self, CovarianceSource, HermitianBlockCov};
use sinebeta_core::estimate;
use sinebeta_core::experiment::{run_collect, ExperimentConfig};
use sinebeta_core::linalg::CMatrix;
use sinebeta_core::oracles;
use sinebeta_core::validation::{validate_suite, ValidationOptions};
use sinebeta_core::{generate_noise, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn params(beta: f64) -> PyResult<sinebeta_core::BetaParams> {
    sinebeta_core::BetaParams::new(beta).map_err(py_err)
}

#[pyclass(name = "BetaParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyBetaParams(sinebeta_core::BetaParams);

#[pymethods]
impl PyBetaParams {
    #[new]
    fn new(beta: f64) -> PyResult<Self> {
        params(beta).map(Self)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    /// Decay rate `β/4` of the drift profile.
    fn rate(&self) -> f64 {
        self.0.rate()
    }

    /// `f(t) = (β/4) exp(-βt/4)`.
    fn drift(&self, t: f64) -> f64 {
        self.0.drift(t)
    }

    fn __repr__(&self) -> String {
        format!("BetaParams(beta={})", self.0.beta())
    }
}

#[pyclass(name = "CountOutcome", frozen, get_all)]
struct PyCountOutcome {
    count: i64,
    frozen: bool,
    stop_time: f64,
    clamps: usize,
}

#[pyclass(name = "CorrelationEstimate", frozen, get_all)]
struct PyEstimate {
    value: f64,
    std_err: f64,
    n_samples: u64,
    estimator_tag: String,
    unfrozen: u64,
    quality_warning: bool,
}

impl From<estimate::CorrelationEstimate> for PyEstimate {
    fn from(e: estimate::CorrelationEstimate) -> Self {
        Self {
            value: e.value,
            std_err: e.std_err,
            n_samples: e.n_samples,
            estimator_tag: e.estimator_tag.as_str().to_string(),
            unfrozen: e.unfrozen,
            quality_warning: e.quality_warning,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!("CorrelationEstimate({} ± {}, n={}, {})", self.value, self.std_err, self.n_samples, self.estimator_tag)
    }
}

/// Number of points in `(0, λ]` for one seed.
#[pyfunction]
fn count_points(beta: f64, lam: f64, seed: u64) -> PyResult<PyCountOutcome> {
    let c = carousel::count_points(&params(beta)?, lam, seed, &FreezeCriterion::default()).map_err(py_err)?;
    Ok(PyCountOutcome { count: c.count, frozen: c.frozen, stop_time: c.stop_time, clamps: c.clamps })
}

/// Point positions in `(0, window_length]`, located to `resolution`.
#[pyfunction]
#[pyo3(signature = (beta, window_length, seed, resolution = 1e-6))]
fn sample_configuration(beta: f64, window_length: f64, seed: u64, resolution: f64) -> PyResult<Vec<f64>> {
    let c = carousel::sample_configuration(&params(beta)?, window_length, seed, resolution).map_err(py_err)?;
    Ok(c.points)
}

/// `(times, paths)` where `paths[i]` is the angle of `lambdas[i]` on the grid.
#[pyfunction]
fn integrate_family(
    beta: f64,
    lambdas: Vec<f64>,
    seed: u64,
    t_end: f64,
    n_steps: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let noise = generate_noise(seed, t_end, n_steps).map_err(py_err)?;
    let tr = sinebeta_core::integrate_family(&params(beta)?, &lambdas, &noise).map_err(py_err)?;
    Ok((tr.times(), (0..tr.width()).map(|i| tr.series(i)).collect()))
}

fn seed_plan(name: &str) -> PyResult<SeedPlan> {
    match name {
        "shared" => Ok(SeedPlan::Shared),
        "split_marginals" => Ok(SeedPlan::SplitMarginals),
        other => Err(PyValueError::new_err(format!("unknown seed plan {other:?}"))),
    }
}

/// `E[P1 P2] - E[P1] E[P2]` for the count products of two window clusters.
#[pyfunction]
#[pyo3(signature = (beta, left, right, n_samples, seed = 0, plan = "split_marginals", workers = 0))]
fn partially_truncated(
    beta: f64,
    left: Vec<(f64, f64)>,
    right: Vec<(f64, f64)>,
    n_samples: u64,
    seed: u64,
    plan: &str,
    workers: usize,
) -> PyResult<PyEstimate> {
    let s = CarouselSampler::new(params(beta)?);
    correlation::partially_truncated_with(&s, &left, &right, n_samples, seed, seed_plan(plan)?, workers)
        .map(Into::into)
        .map_err(py_err)
}

/// Joint cumulant of the counts of disjoint windows.
#[pyfunction]
#[pyo3(signature = (beta, windows, n_samples, seed = 0, plan = "shared", workers = 0))]
fn fully_truncated(
    beta: f64,
    windows: Vec<(f64, f64)>,
    n_samples: u64,
    seed: u64,
    plan: &str,
    workers: usize,
) -> PyResult<PyEstimate> {
    let s = CarouselSampler::new(params(beta)?);
    correlation::fully_truncated_with(&s, &windows, n_samples, seed, seed_plan(plan)?, workers)
        .map(Into::into)
        .map_err(py_err)
}

fn to_cmatrix(rows: &[Vec<Complex64>]) -> PyResult<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_cmatrix(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "HermitianBlockCov", frozen)]
struct PyBlockCov(HermitianBlockCov);

#[pymethods]
impl PyBlockCov {
    /// Blocks as nested lists of complex numbers, one square matrix per step.
    #[new]
    fn new(blocks: Vec<Vec<Vec<Complex64>>>) -> PyResult<Self> {
        let b = blocks.iter().map(|m| to_cmatrix(m)).collect::<PyResult<Vec<_>>>()?;
        HermitianBlockCov::new(b).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn coupled_pair(delta: f64, kappas: Vec<Complex64>) -> PyResult<Self> {
        HermitianBlockCov::coupled_pair(delta, &kappas).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn independent(delta: f64, m: usize, n: usize) -> PyResult<Self> {
        HermitianBlockCov::independent(delta, m, n).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        HermitianBlockCov::from_json(s).map(Self).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        HermitianBlockCov::load_binary(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.0.save_binary(&path).map_err(py_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn n_blocks(&self) -> usize {
        self.0.n_blocks()
    }

    fn blocks(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.0.blocks().iter().map(from_cmatrix).collect()
    }
}

#[pyfunction]
fn hellinger(x: &PyBlockCov, y: &PyBlockCov) -> PyResult<f64> {
    coupling::hellinger_complex_gaussian(&x.0, &y.0).map_err(py_err)
}

#[pyfunction]
fn tv_upper_bound(x: &PyBlockCov, y: &PyBlockCov) -> PyResult<f64> {
    coupling::tv_upper_bound(&x.0, &y.0).map_err(py_err)
}

/// Hellinger distance of coupled pairs with couplings `kappas` from
/// independent pairs of variance `2δ`.
#[pyfunction]
fn hellinger_coupled_pair(delta: f64, kappas: Vec<Complex64>) -> PyResult<f64> {
    coupling::hellinger_coupled_pair(delta, &kappas).map_err(py_err)
}

#[pyclass(name = "RegularizedIncrements", frozen, get_all)]
struct PyRegularized {
    epsilon: f64,
    eigenvalues: Vec<f64>,
    cutoff: usize,
    clipped: bool,
    samples: Vec<Vec<Complex64>>,
    expected_sq_gap: f64,
    covariance: Vec<Vec<Complex64>>,
}

/// Replace eigen-coordinates below `epsilon` by fresh noise of variance
/// `epsilon`. The covariance is estimated from `raw` unless given.
#[pyfunction]
#[pyo3(signature = (raw, epsilon, seed = 0, covariance = None))]
fn spectral_regularize(
    raw: Vec<Vec<Complex64>>,
    epsilon: f64,
    seed: u64,
    covariance: Option<Vec<Vec<Complex64>>>,
) -> PyResult<PyRegularized> {
    let known = covariance.as_deref().map(to_cmatrix).transpose()?;
    let source = match &known {
        Some(m) => CovarianceSource::Known(m),
        None => CovarianceSource::Empirical,
    };
    let r = coupling::spectral_regularize(&raw, source, epsilon, seed).map_err(py_err)?;
    Ok(PyRegularized {
        epsilon: r.epsilon,
        expected_sq_gap: r.expected_sq_gap(),
        covariance: from_cmatrix(&r.covariance()),
        eigenvalues: r.eigenvalues,
        cutoff: r.cutoff,
        clipped: r.clipped,
        samples: r.samples,
    })
}

/// All set partitions of `{0..k-1}`, each as a list of blocks.
#[pyfunction]
fn set_partitions(k: usize) -> PyResult<Vec<Vec<Vec<usize>>>> {
    Ok(combinatorics::enumerate_partitions(k).map_err(py_err)?.map(|p| p.blocks()).collect())
}

/// `(blocks, weight)` pairs of the moment-to-cumulant inversion.
#[pyfunction]
fn mobius_weights(k: usize) -> PyResult<Vec<(Vec<Vec<usize>>, i128)>> {
    Ok(combinatorics::mobius_truncation_weights(k).map_err(py_err)?.into_iter().map(|(p, w)| (p.blocks(), w)).collect())
}

#[pyfunction]
fn stirling2(k: usize, j: usize) -> PyResult<u128> {
    combinatorics::stirling2(k, j).map_err(py_err)
}

#[pyfunction]
fn bell(k: usize) -> PyResult<u128> {
    combinatorics::bell(k).map_err(py_err)
}

#[pyfunction]
fn ordered_bell(k: usize) -> PyResult<u128> {
    combinatorics::ordered_bell(k).map_err(py_err)
}

/// Joint cumulants from joint moments indexed by subset bitmask.
#[pyfunction]
fn cumulants_from_moments(moments: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    combinatorics::cumulants_from_moments(&moments, k).map_err(py_err)
}

#[pyfunction]
fn moments_from_cumulants(cumulants: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    combinatorics::moments_from_cumulants(&cumulants, k).map_err(py_err)
}

#[pyfunction]
fn sine_kernel(x: f64, y: f64) -> f64 {
    oracles::sine_kernel(x, y)
}

#[pyfunction]
fn rho_k_beta2(points: Vec<f64>) -> f64 {
    oracles::rho_k_beta2(&points)
}

#[pyfunction]
fn rho2_truncated_beta2(r: f64) -> f64 {
    oracles::rho2_truncated_beta2(r)
}

#[pyfunction]
fn rho2_truncated_beta2_integrated(w1: (f64, f64), w2: (f64, f64)) -> PyResult<f64> {
    oracles::rho2_truncated_beta2_integrated(w1, w2).map_err(py_err)
}

#[pyfunction]
fn count_variance_beta2(lam: f64) -> PyResult<f64> {
    oracles::count_variance_beta2(lam).map_err(py_err)
}

/// `(value, decay_exponent, oscillating)`; `value` is `None` for β > 2.
#[pyfunction]
fn leading_asymptotics(beta: f64, r: f64) -> PyResult<(Option<f64>, f64, bool)> {
    let a = oracles::forrester_haldane_leading(beta, r).map_err(py_err)?;
    Ok((a.value, a.decay_exponent, a.oscillating))
}

/// `(value, applicable)` of the overcrowding envelope.
#[pyfunction]
fn overcrowding_bound(beta: f64, lam: f64, n: u32) -> PyResult<(f64, bool)> {
    let b = oracles::overcrowding_bound(beta, lam, n).map_err(py_err)?;
    Ok((b.value, b.applicable))
}

/// Run a JSON experiment config in memory; returns `(csv, summary_json)`.
#[pyfunction]
#[pyo3(signature = (config_json, workers = 0))]
fn run_experiment(py: Python<'_>, config_json: &str, workers: usize) -> PyResult<(String, String)> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let out = py.detach(|| run_collect(&cfg, workers)).map_err(py_err)?;
    if let Some(e) = out.error {
        return Err(PyValueError::new_err(format!("run stopped early: {e}")));
    }
    Ok((out.csv().map_err(py_err)?, out.summary.to_string()))
}

/// Run acceptance criteria; returns `(id, name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (criteria, scale = 1.0, seed = None))]
fn validate(
    py: Python<'_>,
    criteria: Vec<u32>,
    scale: f64,
    seed: Option<u64>,
) -> PyResult<Vec<(u32, String, bool, String)>> {
    if !(scale > 0.0) {
        return Err(PyValueError::new_err("scale must be positive"));
    }
    let mut opts = ValidationOptions { scale, ..Default::default() };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = py.detach(|| validate_suite(&criteria, &opts));
    Ok(report.entries.into_iter().map(|e| (e.id, e.name, e.passed, e.detail)).collect())
}

#[pymodule]
fn sinebeta(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBetaParams>()?;
    m.add_class::<PyCountOutcome>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyBlockCov>()?;
    m.add_class::<PyRegularized>()?;
    m.add_function(wrap_pyfunction!(count_points, m)?)?;
    m.add_function(wrap_pyfunction!(sample_configuration, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_family, m)?)?;
    m.add_function(wrap_pyfunction!(partially_truncated, m)?)?;
    m.add_function(wrap_pyfunction!(fully_truncated, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(tv_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_coupled_pair, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_regularize, m)?)?;
    m.add_function(wrap_pyfunction!(set_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(mobius_weights, m)?)?;
    m.add_function(wrap_pyfunction!(stirling2, m)?)?;
    m.add_function(wrap_pyfunction!(bell, m)?)?;
    m.add_function(wrap_pyfunction!(ordered_bell, m)?)?;
    m.add_function(wrap_pyfunction!(cumulants_from_moments, m)?)?;
    m.add_function(wrap_pyfunction!(moments_from_cumulants, m)?)?;
    m.add_function(wrap_pyfunction!(sine_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(rho_k_beta2, m)?)?;
    m.add_function(wrap_pyfunction!(rho2_truncated_beta2, m)?)?;
    m.add_function(wrap_pyfunction!(rho2_truncated_beta2_integrated, m)?)?;
    m.add_function(wrap_pyfunction!(count_variance_beta2, m)?)?;
    m.add_function(wrap_pyfunction!(leading_asymptotics, m)?)?;
    m.add_function(wrap_pyfunction!(overcrowding_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
