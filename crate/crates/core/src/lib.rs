//! Leverage-score subsampled logistic regression.
//!
//! The library fits a binary logistic model on a small, randomly sampled and
//! rescaled subset of a tall data matrix (n >> d) and provides the machinery
//! to check, statistically, that the subsampled estimate approximates the
//! full-data MLE in terms of estimated probabilities and overall discrepancy.
//!
//! The pipeline:
//!
//! 1. [`linalg`] — orthonormal basis of the design matrix and exact row
//!    leverage scores.
//! 2. [`sketch`] — sampling distributions (uniform / leverage / L2S), the
//!    sampling-and-rescaling plan, and the sample-size rule `ceil(8d/(δ ε²))`.
//! 3. [`logreg`] — full-data MLE via IRLS and the subsampled MLE via weighted
//!    IRLS over the sampled rows.
//! 4. [`analysis`] — error metrics, the two structural conditions behind the
//!    approximation bound, and Monte Carlo verifiers for the unbiasedness,
//!    variance, and end-to-end probability guarantees.
//! 5. [`dataset`] / [`experiment`] / [`report`] — CSV ingestion, the seeded
//!    experiment sweep, and deterministic CSV/JSON results emission.

pub mod analysis;
pub mod dataset;
pub mod experiment;
pub mod linalg;
pub mod logreg;
pub mod report;
pub mod sketch;
pub mod synth;

mod seed;

pub use analysis::{
    check_structural_conditions, compute_metrics, verify_conditions, verify_probability_bound,
    verify_unbiasedness, verify_variance_bound, AnalysisError, ConditionProbe, ConditionReport,
    FrequencyReport, MetricsRecord, MonteCarloSummary,
};
pub use dataset::{load_dataset, DatasetError, DatasetSpec, LabelColumn};
pub use experiment::{
    run_experiment, CellStats, ExperimentConfig, ExperimentError, ExperimentReport,
};
pub use linalg::{
    leverage_scores, orthonormal_basis, DesignMatrix, LeverageScores, LinalgError, OrthonormalBasis,
};
pub use logreg::{
    fit_full, fit_subsampled, grad_log_likelihood, log_likelihood, predict_probs,
    subsampled_log_likelihood, Coefficients, LogisticFit, LogregError, ResponseVector,
    SolverConfig, StepDamping,
};
pub use report::{emit_report, parse_json_report, render_report, ReportError, ReportFormat};
pub use sketch::{
    apply_sketch, apply_sketch_vec, construct_sketch, make_distribution, required_sample_size,
    sketch_diagonal, SamplingDistribution, SamplingScheme, SketchDiagonal, SketchEntry,
    SketchError, SketchPlan,
};
