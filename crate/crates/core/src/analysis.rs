//! Error metrics, structural-condition checks, and Monte Carlo verification
//! of the sampling guarantees.
//!
//! The subsampled estimator comes with three layers of statistically
//! checkable structure:
//!
//! * the sketch is an unbiased estimator of U^T x with a known variance
//!   bound ([`verify_unbiasedness`], [`verify_variance_bound`]);
//! * two structural conditions on the sketch relative to the basis U and the
//!   full-fit residual hold with probability at least 1 - delta at the
//!   prescribed sample size ([`verify_conditions`]);
//! * under those conditions the subsampled probabilities approximate the
//!   full-data ones: ||p_hat - p_star|| <= eps * ||y - p_star||, which also
//!   pins the overall discrepancy ([`verify_probability_bound`]).

use crate::linalg::{
    leverage_scores, orthonormal_basis, DesignMatrix, LinalgError, OrthonormalBasis,
};
use crate::logreg::{
    fit_full, fit_subsampled, log_likelihood, subsampled_log_likelihood, LogisticFit, LogregError,
    ResponseVector, SolverConfig,
};
use crate::seed::derive_seed;
use crate::sketch::{
    construct_sketch, make_distribution, required_sample_size, sketch_diagonal,
    SamplingDistribution, SamplingScheme, SketchError, SketchPlan,
};
use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{name} must lie strictly inside (0, 1), got {value}")]
    InvalidRange { name: &'static str, value: f64 },
    #[error("Monte Carlo verification needs at least {minimum} trials, got {got}")]
    TooFewTrials { minimum: usize, got: usize },
    #[error("row {index} has zero sampling probability but nonzero x and basis row")]
    ZeroProbabilityConflict { index: usize },
    #[error("full-data MLE did not converge; the baseline is undefined")]
    FullFitDiverged,
    #[error("baseline log-likelihood is numerically zero; relative errors are undefined")]
    DegenerateBaseline,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Logreg(#[from] LogregError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Per-fit comparison metrics between a subsampled fit and the full-data fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    /// ||p_hat - p_star||_2 / ||p_star||_2.
    pub rel_prob_err: f64,
    /// Fraction of rows misclassified by the subsampled fit at threshold 1/2
    /// (ties predict class 1).
    pub misclass_rate: f64,
    /// |l(beta_hat) - l(beta_star)| / (-l(beta_star)) on the full data.
    pub rel_nll_full: f64,
    /// |l_sub(beta_hat) - l(beta_star)| / (-l(beta_star)).
    pub rel_nll_sub: f64,
    /// ||y - p_hat||_2.
    pub discrepancy_hat: f64,
    /// ||y - p_star||_2.
    pub discrepancy_star: f64,
}

impl MetricsRecord {
    pub const FIELD_NAMES: [&'static str; 6] = [
        "rel_prob_err",
        "misclass_rate",
        "rel_nll_full",
        "rel_nll_sub",
        "discrepancy_hat",
        "discrepancy_star",
    ];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.rel_prob_err,
            self.misclass_rate,
            self.rel_nll_full,
            self.rel_nll_sub,
            self.discrepancy_hat,
            self.discrepancy_star,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            rel_prob_err: v[0],
            misclass_rate: v[1],
            rel_nll_full: v[2],
            rel_nll_sub: v[3],
            discrepancy_hat: v[4],
            discrepancy_star: v[5],
        }
    }
}

/// Evaluation of the two structural conditions (and, when the subsampled
/// probabilities are supplied, of the probability bound they imply).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub eps: f64,
    /// | ||U^T S^T S x|| - ||U^T x|| | vs (eps/2) ||x||.
    pub cond1_lhs: f64,
    pub cond1_rhs: f64,
    /// ||U^T S^T S (y - p_star)|| vs (eps/2) ||y - p_star||.
    pub cond2_lhs: f64,
    pub cond2_rhs: f64,
    pub cond1_holds: bool,
    pub cond2_holds: bool,
    /// ||p_hat - p_star|| vs eps ||y - p_star||; lhs is 0 when no subsampled
    /// probabilities were supplied.
    pub theorem_lhs: f64,
    pub theorem_rhs: f64,
    pub theorem_holds: bool,
}

/// Outcome of a Monte Carlo expectation test.
///
/// For [`verify_variance_bound`], `empirical_mean` is the Monte Carlo mean of
/// the squared deviation, `bound` the theoretical bound, and `standard_error`
/// the absolute standard error of the mean. For [`verify_unbiasedness`],
/// `empirical_mean` is the worst per-coordinate deviation in standard-error
/// units, `bound` is 4, and `standard_error` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub empirical_mean: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub pass: bool,
}

/// Outcome of a Monte Carlo frequency test against a 1 - delta guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyReport {
    pub trials: usize,
    pub successes: usize,
    /// Subsampled fits that errored or failed to converge; counted as
    /// unsuccessful trials.
    pub failed_fits: usize,
    /// Trials where the probability bound held but the discrepancy bound did
    /// not. Pure algebra says this must stay 0.
    pub corollary_failures: usize,
    pub success_fraction: f64,
    /// 1 - delta - 3 * sqrt(delta (1 - delta) / trials).
    pub required_fraction: f64,
    pub pass: bool,
}

/// Which vector the first structural condition is probed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionProbe {
    /// p_hat - p_star from a subsampled fit on the same plan (the vector the
    /// argument actually applies the condition to).
    FittedDelta,
    /// A fresh random unit vector per trial.
    RandomUnit,
}

impl ConditionProbe {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "fitted-delta" | "fitted_delta" | "fitted" => Some(ConditionProbe::FittedDelta),
            "random-unit" | "random_unit" | "random" => Some(ConditionProbe::RandomUnit),
            _ => None,
        }
    }
}

fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// U^T S^T S v computed from the nonzero entries of the S^T S diagonal.
fn basis_weighted_product(
    u: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let mut out = Array1::zeros(u.ncols());
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            out.scaled_add(w * v[i], &u.row(i));
        }
    }
    out
}

/// All comparison metrics between a subsampled fit and the full-data fit.
pub fn compute_metrics(
    x: &DesignMatrix,
    y: &ResponseVector,
    full: &LogisticFit,
    sub: &LogisticFit,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
) -> Result<MetricsRecord, AnalysisError> {
    let n = x.rows();
    for len in [y.len(), full.probs.len(), sub.probs.len()] {
        if len != n {
            return Err(AnalysisError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }

    let p_star = &full.probs;
    let p_hat = &sub.probs;
    let diff = p_hat - p_star;
    let rel_prob_err = norm(diff.view()) / norm(p_star.view());

    let misclassified = y
        .values()
        .iter()
        .zip(p_hat.iter())
        .filter(|(&yi, &pi)| {
            let predicted = if pi >= 0.5 { 1.0 } else { 0.0 };
            predicted != yi
        })
        .count();
    let misclass_rate = misclassified as f64 / n as f64;

    let ll_star = log_likelihood(x, y, &full.beta)?;
    let ll_hat = log_likelihood(x, y, &sub.beta)?;
    let ll_sub = subsampled_log_likelihood(x, y, plan, dist, &sub.beta)?;
    let denom = -ll_star;
    if !denom.is_finite() || denom <= 0.0 {
        return Err(AnalysisError::DegenerateBaseline);
    }
    let rel_nll_full = (ll_hat - ll_star).abs() / denom;
    let rel_nll_sub = (ll_sub - ll_star).abs() / denom;

    let res_hat = &y.values() - p_hat;
    let res_star = &y.values() - p_star;

    Ok(MetricsRecord {
        rel_prob_err,
        misclass_rate,
        rel_nll_full,
        rel_nll_sub,
        discrepancy_hat: norm(res_hat.view()),
        discrepancy_star: norm(res_star.view()),
    })
}

/// Evaluates both structural conditions for a given probe vector `x_vec` and
/// the full-fit residual y - p_star, plus the probability bound when the
/// subsampled probabilities `p_hat` are supplied.
#[allow(clippy::too_many_arguments)]
pub fn check_structural_conditions(
    basis: &OrthonormalBasis,
    plan: &SketchPlan,
    dist: &SamplingDistribution,
    x_vec: ArrayView1<'_, f64>,
    y: &ResponseVector,
    p_star: ArrayView1<'_, f64>,
    eps: f64,
    p_hat: Option<ArrayView1<'_, f64>>,
) -> Result<ConditionReport, AnalysisError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::InvalidRange {
            name: "eps",
            value: eps,
        });
    }
    let n = basis.rows();
    for len in [plan.source_rows(), x_vec.len(), y.len(), p_star.len()] {
        if len != n {
            return Err(AnalysisError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let diag = sketch_diagonal(plan, dist)?;
    let u = basis.u();

    let ut_sts_x = basis_weighted_product(u, diag.weights(), x_vec);
    let ut_x = u.t().dot(&x_vec);
    let cond1_lhs = (norm(ut_sts_x.view()) - norm(ut_x.view())).abs();
    let cond1_rhs = 0.5 * eps * norm(x_vec);

    let residual = &y.values() - &p_star;
    let ut_sts_r = basis_weighted_product(u, diag.weights(), residual.view());
    let cond2_lhs = norm(ut_sts_r.view());
    let cond2_rhs = 0.5 * eps * norm(residual.view());

    let theorem_rhs = eps * norm(residual.view());
    let theorem_lhs = match p_hat {
        Some(ph) => {
            if ph.len() != n {
                return Err(AnalysisError::DimensionMismatch {
                    expected: n,
                    got: ph.len(),
                });
            }
            let diff = &ph - &p_star;
            norm(diff.view())
        }
        None => 0.0,
    };

    Ok(ConditionReport {
        eps,
        cond1_lhs,
        cond1_rhs,
        cond2_lhs,
        cond2_rhs,
        cond1_holds: cond1_lhs <= cond1_rhs,
        cond2_holds: cond2_lhs <= cond2_rhs,
        theorem_lhs,
        theorem_rhs,
        theorem_holds: theorem_lhs <= theorem_rhs,
    })
}

const MIN_MC_TRIALS: usize = 1_000;

/// Estimator stream for the Monte Carlo verifiers: U^T S^T S x accumulated
/// directly from the plan entries in draw order.
fn sketched_basis_product(
    u: ArrayView2<'_, f64>,
    x_vec: ArrayView1<'_, f64>,
    probs: ArrayView1<'_, f64>,
    plan: &SketchPlan,
) -> Array1<f64> {
    let s = plan.sample_size() as f64;
    let mut out = Array1::zeros(u.ncols());
    for e in plan.entries() {
        let c = x_vec[e.index] / (s * probs[e.index]);
        out.scaled_add(c, &u.row(e.index));
    }
    out
}

/// Checks that the per-coordinate Monte Carlo mean of U^T S^T S x matches
/// U^T x within 4 standard errors.
pub fn verify_unbiasedness(
    basis: &OrthonormalBasis,
    x_vec: ArrayView1<'_, f64>,
    dist: &SamplingDistribution,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloSummary, AnalysisError> {
    if trials < MIN_MC_TRIALS {
        return Err(AnalysisError::TooFewTrials {
            minimum: MIN_MC_TRIALS,
            got: trials,
        });
    }
    let n = basis.rows();
    if x_vec.len() != n || dist.len() != n {
        return Err(AnalysisError::DimensionMismatch {
            expected: n,
            got: x_vec.len().min(dist.len()),
        });
    }
    let u = basis.u();
    let d = basis.cols();
    let target = u.t().dot(&x_vec);

    let mut sums = vec![0.0; d];
    let mut sums_sq = vec![0.0; d];
    for trial in 0..trials {
        let plan = construct_sketch(dist, s, derive_seed(seed, &[1, trial as u64]))?;
        let est = sketched_basis_product(u, x_vec, dist.probs(), &plan);
        for (j, &v) in est.iter().enumerate() {
            sums[j] += v;
            sums_sq[j] += v * v;
        }
    }

    let t = trials as f64;
    let mut worst_z: f64 = 0.0;
    for j in 0..d {
        let mean = sums[j] / t;
        let var = ((sums_sq[j] - t * mean * mean) / (t - 1.0)).max(0.0);
        let se = (var / t).sqrt();
        let dev = (mean - target[j]).abs();
        // The floor keeps degenerate estimators (zero sample variance, e.g. a
        // single-row distribution) from turning accumulated roundoff of order
        // eps into an infinite z-score.
        let floor = 1e-13 * (1.0 + target[j].abs());
        let z = dev / se.max(floor);
        worst_z = worst_z.max(z);
    }

    Ok(MonteCarloSummary {
        trials,
        empirical_mean: worst_z,
        bound: 4.0,
        standard_error: 0.0,
        pass: worst_z <= 4.0,
    })
}

/// Checks the variance bound E ||U^T S^T S x - U^T x||^2 <= (d/s) ||x||^2
/// for leverage-proportional sampling, or the general bound
/// sum_i ||U_i*||^2 x_i^2 / (s pi_i) when an arbitrary distribution is given.
pub fn verify_variance_bound(
    basis: &OrthonormalBasis,
    x_vec: ArrayView1<'_, f64>,
    s: usize,
    trials: usize,
    seed: u64,
    general_dist: Option<&SamplingDistribution>,
) -> Result<MonteCarloSummary, AnalysisError> {
    if trials < MIN_MC_TRIALS {
        return Err(AnalysisError::TooFewTrials {
            minimum: MIN_MC_TRIALS,
            got: trials,
        });
    }
    let n = basis.rows();
    if x_vec.len() != n {
        return Err(AnalysisError::DimensionMismatch {
            expected: n,
            got: x_vec.len(),
        });
    }
    let u = basis.u();
    let d = basis.cols();

    let row_norms_sq: Vec<f64> = u.rows().into_iter().map(|r| r.dot(&r)).collect();

    let (dist, bound) = match general_dist {
        Some(dist) => {
            if dist.len() != n {
                return Err(AnalysisError::DimensionMismatch {
                    expected: n,
                    got: dist.len(),
                });
            }
            let mut bound = 0.0;
            for i in 0..n {
                let weight = row_norms_sq[i] * x_vec[i] * x_vec[i];
                if dist.probs()[i] <= 0.0 {
                    if weight != 0.0 {
                        return Err(AnalysisError::ZeroProbabilityConflict { index: i });
                    }
                    continue;
                }
                bound += weight / (s as f64 * dist.probs()[i]);
            }
            (dist.clone(), bound)
        }
        None => {
            // Leverage-proportional probabilities built from the basis rows.
            let scores = leverage_scores(basis);
            let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), n)?;
            let bound = d as f64 / s as f64 * x_vec.dot(&x_vec);
            (dist, bound)
        }
    };

    let target = u.t().dot(&x_vec);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for trial in 0..trials {
        let plan = construct_sketch(&dist, s, derive_seed(seed, &[2, trial as u64]))?;
        let est = sketched_basis_product(u, x_vec, dist.probs(), &plan);
        let diff = &est - &target;
        let sq = diff.dot(&diff);
        sum += sq;
        sum_sq += sq * sq;
    }

    let t = trials as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    let se = (var / t).sqrt();
    let pass = mean <= bound * (1.0 + 5.0 * se / bound.max(1e-300));

    Ok(MonteCarloSummary {
        trials,
        empirical_mean: mean,
        bound,
        standard_error: se,
        pass,
    })
}

fn binomial_gate(delta: f64, trials: usize) -> f64 {
    1.0 - delta - 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

fn prepare_baseline(
    x: &DesignMatrix,
    y: &ResponseVector,
    scheme: SamplingScheme,
    cfg: &SolverConfig,
) -> Result<(LogisticFit, OrthonormalBasis, SamplingDistribution), AnalysisError> {
    if y.len() != x.rows() {
        return Err(AnalysisError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let full = fit_full(x, y, cfg)?;
    if !full.converged {
        return Err(AnalysisError::FullFitDiverged);
    }
    let basis = orthonormal_basis(x)?;
    let scores = leverage_scores(&basis);
    let dist = make_distribution(scheme, Some(&scores), x.rows())?;
    Ok((full, basis, dist))
}

/// Runs `trials` independent sketch-and-fit cycles at the prescribed sample
/// size and reports how often the probability bound
/// ||p_hat - p_star|| <= eps ||y - p_star|| holds. For every holding trial
/// the implied discrepancy bound is asserted as well.
#[allow(clippy::too_many_arguments)]
pub fn verify_probability_bound(
    x: &DesignMatrix,
    y: &ResponseVector,
    scheme: SamplingScheme,
    eps: f64,
    delta: f64,
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<FrequencyReport, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::TooFewTrials { minimum: 1, got: 0 });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalysisError::InvalidRange {
            name: "delta",
            value: delta,
        });
    }
    let (full, _basis, dist) = prepare_baseline(x, y, scheme, cfg)?;
    let s = required_sample_size(x.cols(), eps, delta)?;

    let p_star = &full.probs;
    let residual = &y.values() - p_star;
    let residual_norm = norm(residual.view());
    let theorem_rhs = eps * residual_norm;

    #[derive(Clone, Copy)]
    enum Trial {
        FailedFit,
        Miss,
        Hold { corollary_ok: bool },
    }

    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let plan_seed = derive_seed(seed, &[3, trial as u64]);
            let plan = match construct_sketch(&dist, s, plan_seed) {
                Ok(p) => p,
                Err(_) => return Trial::FailedFit,
            };
            let fit = match fit_subsampled(x, y, &plan, &dist, cfg) {
                Ok(f) => f,
                Err(_) => return Trial::FailedFit,
            };
            if !fit.converged {
                return Trial::FailedFit;
            }
            let diff = &fit.probs - p_star;
            let lhs = norm(diff.view());
            if lhs <= theorem_rhs {
                let res_hat = &y.values() - &fit.probs;
                let cor_lhs = (norm(res_hat.view()) - residual_norm).abs();
                // The reverse triangle inequality makes this a consequence of
                // the bound above; the tiny slack absorbs norm roundoff.
                let corollary_ok = cor_lhs <= theorem_rhs * (1.0 + 1e-12);
                Trial::Hold { corollary_ok }
            } else {
                Trial::Miss
            }
        })
        .collect();

    let mut successes = 0;
    let mut failed_fits = 0;
    let mut corollary_failures = 0;
    for o in outcomes {
        match o {
            Trial::FailedFit => failed_fits += 1,
            Trial::Miss => {}
            Trial::Hold { corollary_ok } => {
                successes += 1;
                if !corollary_ok {
                    corollary_failures += 1;
                }
            }
        }
    }

    let success_fraction = successes as f64 / trials as f64;
    let required_fraction = binomial_gate(delta, trials);
    Ok(FrequencyReport {
        trials,
        successes,
        failed_fits,
        corollary_failures,
        success_fraction,
        required_fraction,
        pass: success_fraction >= required_fraction && corollary_failures == 0,
    })
}

/// Estimates how often both structural conditions hold jointly at the
/// prescribed sample size s = ceil(8 d / (delta eps^2)).
#[allow(clippy::too_many_arguments)]
pub fn verify_conditions(
    x: &DesignMatrix,
    y: &ResponseVector,
    scheme: SamplingScheme,
    eps: f64,
    delta: f64,
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
    probe: ConditionProbe,
) -> Result<FrequencyReport, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::TooFewTrials { minimum: 1, got: 0 });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalysisError::InvalidRange {
            name: "delta",
            value: delta,
        });
    }
    let (full, basis, dist) = prepare_baseline(x, y, scheme, cfg)?;
    let s = required_sample_size(x.cols(), eps, delta)?;
    let n = x.rows();
    let p_star = &full.probs;

    #[derive(Clone, Copy)]
    enum Trial {
        FailedFit,
        Checked { both_hold: bool },
    }

    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let plan_seed = derive_seed(seed, &[4, trial as u64]);
            let plan = match construct_sketch(&dist, s, plan_seed) {
                Ok(p) => p,
                Err(_) => return Trial::FailedFit,
            };
            let probe_vec: Array1<f64> = match probe {
                ConditionProbe::RandomUnit => {
                    // Gaussian directions are uniform on the sphere.
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[5, trial as u64]));
                    let mut v: Array1<f64> = (0..n)
                        .map(|_| crate::synth::standard_normal(&mut rng))
                        .collect();
                    let len = norm(v.view());
                    if len > 0.0 {
                        v /= len;
                    }
                    v
                }
                ConditionProbe::FittedDelta => {
                    let fit = match fit_subsampled(x, y, &plan, &dist, cfg) {
                        Ok(f) => f,
                        Err(_) => return Trial::FailedFit,
                    };
                    if !fit.converged {
                        return Trial::FailedFit;
                    }
                    &fit.probs - p_star
                }
            };
            match check_structural_conditions(
                &basis,
                &plan,
                &dist,
                probe_vec.view(),
                y,
                p_star.view(),
                eps,
                None,
            ) {
                Ok(report) => Trial::Checked {
                    both_hold: report.cond1_holds && report.cond2_holds,
                },
                Err(_) => Trial::FailedFit,
            }
        })
        .collect();

    let mut successes = 0;
    let mut failed_fits = 0;
    for o in outcomes {
        match o {
            Trial::FailedFit => failed_fits += 1,
            Trial::Checked { both_hold } => {
                if both_hold {
                    successes += 1;
                }
            }
        }
    }

    let success_fraction = successes as f64 / trials as f64;
    let required_fraction = binomial_gate(delta, trials);
    Ok(FrequencyReport {
        trials,
        successes,
        failed_fits,
        corollary_failures: 0,
        success_fraction,
        required_fraction,
        pass: success_fraction >= required_fraction,
    })
}
