//! Logistic model evaluation, full-data MLE via IRLS, and the subsampled MLE
//! via weighted IRLS over the sampled rows.
//!
//! Both solvers run damped Newton (equivalently IRLS) from beta = 0 and stop
//! when the score norm drops below the tolerance. Convergence is withheld on
//! numerically separated data: when every fitted probability saturates at 0
//! or 1 the MLE does not exist, so the solver keeps iterating and reports
//! `converged = false` at the iteration cap instead of certifying a
//! diverging iterate.

use crate::linalg::{solve_spd, DesignMatrix};
use crate::sketch::{sketch_diagonal, SamplingDistribution, SketchError, SketchPlan};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogregError {
    #[error("expected {expected} rows/entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label at row {row} is {value}, labels must be exactly 0 or 1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("weighted normal matrix is numerically singular")]
    SingularHessian,
    #[error("sketch plan is empty")]
    EmptyPlan,
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Binary response vector with entries exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    labels: Array1<f64>,
}

impl ResponseVector {
    pub fn new(labels: Array1<f64>) -> Result<Self, LogregError> {
        for (row, &v) in labels.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(LogregError::InvalidLabel { row, value: v });
            }
        }
        Ok(Self { labels })
    }

    pub fn from_slice(labels: &[f64]) -> Result<Self, LogregError> {
        Self::new(Array1::from(labels.to_vec()))
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.labels.view()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Coefficient vector; entries must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    beta: Array1<f64>,
}

impl Coefficients {
    pub fn new(beta: Array1<f64>) -> Result<Self, LogregError> {
        if let Some(index) = beta.iter().position(|v| !v.is_finite()) {
            return Err(LogregError::NonFiniteCoefficient { index });
        }
        Ok(Self { beta })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            beta: Array1::zeros(d),
        }
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.beta.view()
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Step-size control for the Newton update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepDamping {
    /// Always take the full Newton step.
    None,
    /// Halve the step until the (sub)likelihood does not decrease.
    Halving,
}

/// IRLS solver knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Absolute tolerance on the score norm ||X^T (y - p)||_2 (or its
    /// weighted counterpart). `None` resolves to 1e-8 * sqrt(n).
    pub grad_tol: Option<f64>,
    pub max_iter: usize,
    /// Floor applied to the IRLS weights p(1-p) so the normal matrix stays
    /// positive definite when probabilities saturate.
    pub weight_floor: f64,
    /// Relative ridge: each iteration adds
    /// `hessian_ridge * trace(X^T W X) / d` to the normal-matrix diagonal.
    pub hessian_ridge: f64,
    pub step_damping: StepDamping,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: None,
            max_iter: 100,
            weight_floor: 1e-10,
            hessian_ridge: 1e-10,
            step_damping: StepDamping::Halving,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), LogregError> {
        if let Some(t) = self.grad_tol {
            if t <= 0.0 || !t.is_finite() {
                return Err(LogregError::InvalidConfig("grad_tol must be positive"));
            }
        }
        if self.max_iter < 1 {
            return Err(LogregError::InvalidConfig("max_iter must be at least 1"));
        }
        if self.weight_floor.is_nan() || self.weight_floor < 0.0 {
            return Err(LogregError::InvalidConfig("weight_floor must be >= 0"));
        }
        if self.hessian_ridge.is_nan() || self.hessian_ridge < 0.0 {
            return Err(LogregError::InvalidConfig("hessian_ridge must be >= 0"));
        }
        Ok(())
    }

    pub fn resolved_grad_tol(&self, n: usize) -> f64 {
        self.grad_tol.unwrap_or(1e-8 * (n as f64).sqrt())
    }
}

/// Result of a (full or subsampled) logistic fit. `probs` always covers all
/// n source rows, also for subsampled fits.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub beta: Coefficients,
    pub probs: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// False for the full-data fit, true for the subsampled fit.
    pub weighted: bool,
}

/// Every fitted probability within this distance of 0 or 1 means the data is
/// numerically separated and the MLE does not exist.
const SATURATION_MARGIN: f64 = 1e-6;

/// Overflow-safe sigmoid, clamped into the open interval (0, 1).
fn sigmoid(t: f64) -> f64 {
    let p = if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// One log-likelihood term y*t - log(1 + exp(t)), evaluated without overflow
/// on either branch of t.
fn loglik_term(y: f64, t: f64) -> f64 {
    if t <= 0.0 {
        y * t - t.exp().ln_1p()
    } else {
        (y - 1.0) * t - (-t).exp().ln_1p()
    }
}

/// Estimated probabilities p_i = sigmoid(X_i* beta).
pub fn predict_probs(x: &DesignMatrix, beta: &Coefficients) -> Result<Array1<f64>, LogregError> {
    if beta.len() != x.cols() {
        return Err(LogregError::DimensionMismatch {
            expected: x.cols(),
            got: beta.len(),
        });
    }
    let eta = x.as_array().dot(&beta.values());
    Ok(eta.mapv(sigmoid))
}

/// Full-data log-likelihood sum_i (y_i X_i* beta - log(1 + exp(X_i* beta))).
pub fn log_likelihood(
    x: &DesignMatrix,
    y: &ResponseVector,
    beta: &Coefficients,
) -> Result<f64, LogregError> {
    check_xy(x, y)?;
    if beta.len() != x.cols() {
        return Err(LogregError::DimensionMismatch {
            expected: x.cols(),
            got: beta.len(),
        });
    }
    let eta = x.as_array().dot(&beta.values());
    Ok(eta
        .iter()
        .zip(y.values().iter())
        .map(|(&t, &yi)| loglik_term(yi, t))
        .sum())
}

/// Score vector X^T (y - p(beta)).
pub fn grad_log_likelihood(
    x: &DesignMatrix,
    y: &ResponseVector,
    beta: &Coefficients,
) -> Result<Array1<f64>, LogregError> {
    check_xy(x, y)?;
    let p = predict_probs(x, beta)?;
    let residual = &y.values() - &p;
    Ok(x.as_array().t().dot(&residual))
}

/// Subsampled log-likelihood y^T S^T S X beta - 1^T S^T S g(beta), evaluated
/// over the sampled rows with their S^T S weights.
pub fn subsampled_log_likelihood(
    x: &DesignMatrix,
    y: &ResponseVector,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
    beta: &Coefficients,
) -> Result<f64, LogregError> {
    check_xy(x, y)?;
    if plan.source_rows() != x.rows() {
        return Err(LogregError::DimensionMismatch {
            expected: x.rows(),
            got: plan.source_rows(),
        });
    }
    let diag = sketch_diagonal(plan, dist)?;
    let xa = x.as_array();
    let mut total = 0.0;
    for (i, &w) in diag.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let t = xa.row(i).dot(&beta.values());
        total += w * loglik_term(y.values()[i], t);
    }
    Ok(total)
}

/// Full-data MLE by IRLS.
pub fn fit_full(
    x: &DesignMatrix,
    y: &ResponseVector,
    cfg: &SolverConfig,
) -> Result<LogisticFit, LogregError> {
    check_xy(x, y)?;
    cfg.validate()?;
    let tol = cfg.resolved_grad_tol(x.rows());
    let weights = Array1::ones(x.rows());
    let outcome = irls(x.view(), y.values(), weights.view(), cfg, tol)?;
    let beta = Coefficients::new(outcome.beta)?;
    let probs = predict_probs(x, &beta)?;
    Ok(LogisticFit {
        beta,
        probs,
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_grad_norm: outcome.final_grad_norm,
        weighted: false,
    })
}

/// Subsampled MLE: maximizes the subsampled log-likelihood by weighted IRLS
/// over the s sampled rows only, then evaluates probabilities on all n rows.
pub fn fit_subsampled(
    x: &DesignMatrix,
    y: &ResponseVector,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
    cfg: &SolverConfig,
) -> Result<LogisticFit, LogregError> {
    check_xy(x, y)?;
    cfg.validate()?;
    if plan.sample_size() == 0 {
        return Err(LogregError::EmptyPlan);
    }
    if plan.source_rows() != x.rows() {
        return Err(LogregError::DimensionMismatch {
            expected: x.rows(),
            got: plan.source_rows(),
        });
    }
    let diag = sketch_diagonal(plan, dist)?;

    // Compact to the distinct sampled rows; per-iteration work is then
    // O(s d^2) independent of n.
    let sampled: Vec<usize> = diag
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, _)| i)
        .collect();
    let m = sampled.len();
    let d = x.cols();
    let mut xs = Array2::zeros((m, d));
    let mut ys = Array1::zeros(m);
    let mut ws = Array1::zeros(m);
    for (row, &i) in sampled.iter().enumerate() {
        xs.row_mut(row).assign(&x.as_array().row(i));
        ys[row] = y.values()[i];
        ws[row] = diag.weights()[i];
    }

    let tol = cfg.resolved_grad_tol(x.rows());
    let outcome = irls(xs.view(), ys.view(), ws.view(), cfg, tol)?;
    let beta = Coefficients::new(outcome.beta)?;
    let probs = predict_probs(x, &beta)?;
    Ok(LogisticFit {
        beta,
        probs,
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_grad_norm: outcome.final_grad_norm,
        weighted: true,
    })
}

fn check_xy(x: &DesignMatrix, y: &ResponseVector) -> Result<(), LogregError> {
    if y.len() != x.rows() {
        return Err(LogregError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    Ok(())
}

struct IrlsOutcome {
    beta: Array1<f64>,
    converged: bool,
    iterations: usize,
    final_grad_norm: f64,
}

/// Damped Newton/IRLS on the weighted log-likelihood
/// sum_i w_i (y_i x_i beta - g_i(beta)), w_i > 0.
fn irls(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
    cfg: &SolverConfig,
    tol: f64,
) -> Result<IrlsOutcome, LogregError> {
    let (m, d) = x.dim();
    let mut beta: Array1<f64> = Array1::zeros(d);
    let mut eta: Array1<f64> = Array1::zeros(m);
    let mut p: Array1<f64> = eta.mapv(sigmoid);
    let mut loglik = weighted_loglik(&y, &w, &eta);

    let mut scaled = Array2::<f64>::zeros((m, d)); // reused W X buffer
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm;

    loop {
        let residual = Zip::from(&y)
            .and(&p)
            .and(&w)
            .map_collect(|&yi, &pi, &wi| wi * (yi - pi));
        let grad = x.t().dot(&residual);
        grad_norm = grad.dot(&grad).sqrt();

        // The saturation guard keeps numerically separated data (every
        // probability pinned at 0 or 1, MLE at infinity) from being reported
        // as converged just because the score underflowed the tolerance.
        if grad_norm <= tol && !saturated(&p) {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }

        // Normal matrix X^T diag(w * max(p(1-p), floor)) X, plus a relative
        // ridge to keep it positive definite under saturation.
        Zip::from(scaled.rows_mut())
            .and(x.rows())
            .and(&p)
            .and(&w)
            .for_each(|mut out, xin, &pi, &wi| {
                let v = wi * (pi * (1.0 - pi)).max(cfg.weight_floor);
                out.assign(&xin);
                out *= v;
            });
        let mut hessian = x.t().dot(&scaled);
        let trace: f64 = (0..d).map(|j| hessian[[j, j]]).sum();
        let ridge = cfg.hessian_ridge * trace / d as f64;
        for j in 0..d {
            hessian[[j, j]] += ridge;
        }

        let delta = solve_spd(hessian, &grad).ok_or(LogregError::SingularHessian)?;

        // Near the optimum the per-step improvement drops below the rounding
        // noise of the total log-likelihood; the slack keeps ulp-level
        // "decreases" from stalling the line search.
        let slack = 1e-12 * (1.0 + loglik.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &(&delta * step);
            let eta_new = x.dot(&candidate);
            let ll_new = weighted_loglik(&y, &w, &eta_new);
            if matches!(cfg.step_damping, StepDamping::None)
                || (ll_new.is_finite() && ll_new >= loglik - slack)
            {
                beta = candidate;
                eta = eta_new;
                p = eta.mapv(sigmoid);
                loglik = ll_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No ascent possible at floating-point resolution; stop here and
            // let the final gradient check decide the flag.
            let residual = Zip::from(&y)
                .and(&p)
                .and(&w)
                .map_collect(|&yi, &pi, &wi| wi * (yi - pi));
            let grad = x.t().dot(&residual);
            grad_norm = grad.dot(&grad).sqrt();
            converged = grad_norm <= tol && !saturated(&p);
            break;
        }
    }

    Ok(IrlsOutcome {
        beta,
        converged,
        iterations,
        final_grad_norm: grad_norm,
    })
}

fn weighted_loglik(y: &ArrayView1<'_, f64>, w: &ArrayView1<'_, f64>, eta: &Array1<f64>) -> f64 {
    Zip::from(y)
        .and(w)
        .and(eta)
        .fold(0.0, |acc, &yi, &wi, &t| acc + wi * loglik_term(yi, t))
}

fn saturated(p: &Array1<f64>) -> bool {
    p.iter().all(|&pi| pi.min(1.0 - pi) < SATURATION_MARGIN)
}
