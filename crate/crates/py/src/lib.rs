//! Python bindings: the main types and operations of the subsampled logistic
//! regression pipeline, from leverage scores through sketched fits and
//! comparison metrics.

use ndarray::Array1;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Dense n-by-d design matrix (row-major input).
#[pyclass(frozen)]
struct DesignMatrix {
    inner: sublogit::DesignMatrix,
}

#[pymethods]
impl DesignMatrix {
    #[new]
    fn new(data: Vec<f64>, rows: usize, cols: usize) -> PyResult<Self> {
        Ok(Self {
            inner: sublogit::DesignMatrix::from_shape_vec(rows, cols, data).map_err(value_err)?,
        })
    }

    /// Builds the matrix from a list of rows.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for row in &rows {
            if row.len() != d {
                return Err(PyValueError::new_err("ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Self::new(data, n, d)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn __repr__(&self) -> String {
        format!(
            "DesignMatrix({} x {})",
            self.inner.rows(),
            self.inner.cols()
        )
    }
}

/// Binary response vector with entries exactly 0 or 1.
#[pyclass(frozen)]
struct ResponseVector {
    inner: sublogit::ResponseVector,
}

#[pymethods]
impl ResponseVector {
    #[new]
    fn new(labels: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: sublogit::ResponseVector::from_slice(&labels).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
}

/// Row leverage scores of a design matrix.
#[pyclass(frozen)]
struct LeverageScores {
    inner: sublogit::LeverageScores,
}

#[pymethods]
impl LeverageScores {
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn sum(&self) -> f64 {
        self.inner.sum()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Sampling probabilities tagged with their scheme.
#[pyclass(frozen)]
struct SamplingDistribution {
    inner: sublogit::SamplingDistribution,
}

#[pymethods]
impl SamplingDistribution {
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme().label()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// The sampled index multiset with rescaling factors.
#[pyclass(frozen)]
struct SketchPlan {
    inner: sublogit::SketchPlan,
}

#[pymethods]
impl SketchPlan {
    #[getter]
    fn sample_size(&self) -> usize {
        self.inner.sample_size()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn indices(&self) -> Vec<usize> {
        self.inner.entries().iter().map(|e| e.index).collect()
    }

    fn scales(&self) -> Vec<f64> {
        self.inner.entries().iter().map(|e| e.scale).collect()
    }
}

/// Result of a full or subsampled logistic fit.
#[pyclass(frozen)]
struct LogisticFit {
    inner: sublogit::LogisticFit,
}

#[pymethods]
impl LogisticFit {
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.values().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs.to_vec()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn final_grad_norm(&self) -> f64 {
        self.inner.final_grad_norm
    }

    #[getter]
    fn weighted(&self) -> bool {
        self.inner.weighted
    }

    fn __repr__(&self) -> String {
        format!(
            "LogisticFit(converged={}, iterations={}, weighted={})",
            self.inner.converged, self.inner.iterations, self.inner.weighted
        )
    }
}

fn solver_config(grad_tol: Option<f64>, max_iter: usize) -> sublogit::SolverConfig {
    sublogit::SolverConfig {
        grad_tol,
        max_iter,
        ..sublogit::SolverConfig::default()
    }
}

/// Exact row leverage scores via an orthonormal basis of range(X).
#[pyfunction]
fn leverage_scores(x: &DesignMatrix) -> PyResult<LeverageScores> {
    let basis = sublogit::orthonormal_basis(&x.inner).map_err(value_err)?;
    Ok(LeverageScores {
        inner: sublogit::leverage_scores(&basis),
    })
}

/// Builds a sampling distribution; scheme is "uniform", "leverage", or "l2s".
#[pyfunction]
#[pyo3(signature = (scheme, leverage, n))]
fn make_distribution(
    scheme: &str,
    leverage: Option<&LeverageScores>,
    n: usize,
) -> PyResult<SamplingDistribution> {
    let scheme = sublogit::SamplingScheme::parse(scheme)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scheme '{scheme}'")))?;
    Ok(SamplingDistribution {
        inner: sublogit::make_distribution(scheme, leverage.map(|l| &l.inner), n)
            .map_err(value_err)?,
    })
}

/// Draws s rows i.i.d. with replacement; identical seeds reproduce the plan.
#[pyfunction]
fn construct_sketch(dist: &SamplingDistribution, s: usize, seed: u64) -> PyResult<SketchPlan> {
    Ok(SketchPlan {
        inner: sublogit::construct_sketch(&dist.inner, s, seed).map_err(value_err)?,
    })
}

/// Sample size sufficient for the approximation guarantee:
/// ceil(8 d / (delta * eps^2)).
#[pyfunction]
fn required_sample_size(d: usize, eps: f64, delta: f64) -> PyResult<usize> {
    sublogit::required_sample_size(d, eps, delta).map_err(value_err)
}

/// Estimated probabilities sigmoid(X beta).
#[pyfunction]
fn predict_probs(x: &DesignMatrix, beta: Vec<f64>) -> PyResult<Vec<f64>> {
    let beta = sublogit::Coefficients::new(Array1::from(beta)).map_err(value_err)?;
    Ok(sublogit::predict_probs(&x.inner, &beta)
        .map_err(value_err)?
        .to_vec())
}

/// Full-data MLE via IRLS.
#[pyfunction]
#[pyo3(signature = (x, y, grad_tol = None, max_iter = 100))]
fn fit_full(
    x: &DesignMatrix,
    y: &ResponseVector,
    grad_tol: Option<f64>,
    max_iter: usize,
) -> PyResult<LogisticFit> {
    Ok(LogisticFit {
        inner: sublogit::fit_full(&x.inner, &y.inner, &solver_config(grad_tol, max_iter))
            .map_err(runtime_err)?,
    })
}

/// Subsampled MLE: weighted IRLS over the sampled rows; probabilities are
/// returned for all n rows.
#[pyfunction]
#[pyo3(signature = (x, y, plan, dist, grad_tol = None, max_iter = 100))]
fn fit_subsampled(
    x: &DesignMatrix,
    y: &ResponseVector,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
    grad_tol: Option<f64>,
    max_iter: usize,
) -> PyResult<LogisticFit> {
    Ok(LogisticFit {
        inner: sublogit::fit_subsampled(
            &x.inner,
            &y.inner,
            &plan.inner,
            &dist.inner,
            &solver_config(grad_tol, max_iter),
        )
        .map_err(runtime_err)?,
    })
}

/// Comparison metrics between a subsampled fit and the full-data fit,
/// returned as a dict.
#[pyfunction]
fn compute_metrics<'py>(
    py: Python<'py>,
    x: &DesignMatrix,
    y: &ResponseVector,
    full: &LogisticFit,
    sub: &LogisticFit,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
) -> PyResult<Bound<'py, PyDict>> {
    let m = sublogit::compute_metrics(
        &x.inner,
        &y.inner,
        &full.inner,
        &sub.inner,
        &plan.inner,
        &dist.inner,
    )
    .map_err(runtime_err)?;
    let out = PyDict::new(py);
    for (name, value) in sublogit::MetricsRecord::FIELD_NAMES
        .iter()
        .zip(m.as_array())
    {
        out.set_item(name, value)?;
    }
    Ok(out)
}

#[pymodule]
fn sublogit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<DesignMatrix>()?;
    m.add_class::<ResponseVector>()?;
    m.add_class::<LeverageScores>()?;
    m.add_class::<SamplingDistribution>()?;
    m.add_class::<SketchPlan>()?;
    m.add_class::<LogisticFit>()?;
    m.add_function(wrap_pyfunction!(leverage_scores, m)?)?;
    m.add_function(wrap_pyfunction!(make_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(construct_sketch, m)?)?;
    m.add_function(wrap_pyfunction!(required_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(predict_probs, m)?)?;
    m.add_function(wrap_pyfunction!(fit_full, m)?)?;
    m.add_function(wrap_pyfunction!(fit_subsampled, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    Ok(())
}
