//! Seeded experiment sweep: for each (scheme, sample size) cell, repeated
//! sketch-and-fit cycles with per-repetition derived seeds, aggregated into
//! means and standard deviations of every metric.

use crate::analysis::{compute_metrics, AnalysisError, MetricsRecord};
use crate::dataset::{DatasetSpec, LabelColumn};
use crate::linalg::{leverage_scores, orthonormal_basis, DesignMatrix, LinalgError};
use crate::logreg::{fit_full, fit_subsampled, LogregError, ResponseVector, SolverConfig};
use crate::report::ReportFormat;
use crate::seed::derive_seed;
use crate::sketch::{construct_sketch, make_distribution, SamplingScheme, SketchError};
use rayon::prelude::*;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("full-data MLE did not converge; aborting the sweep")]
    BaselineDiverged,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Logreg(#[from] LogregError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Sweep definition: which schemes, which sample sizes, how many repetitions.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub schemes: Vec<SamplingScheme>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: vec![
                SamplingScheme::Uniform,
                SamplingScheme::Leverage,
                SamplingScheme::L2s,
            ],
            sample_sizes: Vec::new(),
            repetitions: 20,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

/// Aggregated statistics for one (scheme, sample size) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub scheme: SamplingScheme,
    pub sample_size: usize,
    pub repetitions: usize,
    /// Repetitions whose subsampled fit errored or failed to converge; these
    /// are excluded from the means.
    pub failed_repetitions: usize,
    pub mean: MetricsRecord,
    pub std: MetricsRecord,
    /// Mean wall time of one sketch + subsampled fit, in seconds. Not part
    /// of the emitted report files, which must be reproducible.
    pub mean_fit_seconds: f64,
}

/// Everything a sweep produces: the full-data baseline, per-cell statistics,
/// and wall-time diagnostics.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub n: usize,
    pub d: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub baseline_misclass_rate: f64,
    pub baseline_discrepancy: f64,
    /// -l(beta_star) on the full data.
    pub baseline_nll: f64,
    pub baseline_iterations: usize,
    pub cells: Vec<CellStats>,
    /// Wall-time diagnostics; excluded from emitted files.
    pub full_fit_seconds: f64,
    pub leverage_seconds: f64,
}

impl ExperimentReport {
    /// Equality of everything that gets emitted (ignores wall times).
    pub fn stats_eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.d == other.d
            && self.repetitions == other.repetitions
            && self.seed == other.seed
            && self.baseline_misclass_rate == other.baseline_misclass_rate
            && self.baseline_discrepancy == other.baseline_discrepancy
            && self.baseline_nll == other.baseline_nll
            && self.baseline_iterations == other.baseline_iterations
            && self.cells.len() == other.cells.len()
            && self.cells.iter().zip(other.cells.iter()).all(|(a, b)| {
                a.scheme == b.scheme
                    && a.sample_size == b.sample_size
                    && a.repetitions == b.repetitions
                    && a.failed_repetitions == b.failed_repetitions
                    && a.mean == b.mean
                    && a.std == b.std
            })
    }
}

/// Neumaier-compensated accumulator; keeps aggregation deterministic in the
/// fixed repetition order.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Runs the full sweep. The baseline MLE and the leverage scores are computed
/// exactly once; each repetition draws its plan from a seed derived from
/// (base seed, scheme, s, repetition), so reports are reproducible and cells
/// are independent.
pub fn run_experiment(
    x: &DesignMatrix,
    y: &ResponseVector,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    if cfg.repetitions < 1 {
        return Err(ExperimentError::InvalidConfig(
            "repetitions must be at least 1".into(),
        ));
    }
    for &s in &cfg.sample_sizes {
        if s < x.cols() {
            return Err(ExperimentError::InvalidConfig(format!(
                "sample size {s} is below the column count {}",
                x.cols()
            )));
        }
    }

    let t_full = Instant::now();
    let full = fit_full(x, y, &cfg.solver)?;
    let full_fit_seconds = t_full.elapsed().as_secs_f64();
    if !full.converged {
        return Err(ExperimentError::BaselineDiverged);
    }

    let t_lev = Instant::now();
    let basis = orthonormal_basis(x)?;
    let scores = leverage_scores(&basis);
    let leverage_seconds = t_lev.elapsed().as_secs_f64();

    let n = x.rows();
    let baseline_misclass = y
        .values()
        .iter()
        .zip(full.probs.iter())
        .filter(|(&yi, &pi)| (if pi >= 0.5 { 1.0 } else { 0.0 }) != yi)
        .count() as f64
        / n as f64;
    let residual = &y.values() - &full.probs;
    let baseline_discrepancy = residual.dot(&residual).sqrt();
    let baseline_nll = -crate::logreg::log_likelihood(x, y, &full.beta)?;

    let mut cells = Vec::new();
    for &scheme in &cfg.schemes {
        let dist = make_distribution(scheme, Some(&scores), n)?;
        for &s in &cfg.sample_sizes {
            let outcomes: Vec<Option<(MetricsRecord, f64)>> = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let seed = derive_seed(cfg.seed, &[scheme.tag(), s as u64, rep as u64]);
                    let t = Instant::now();
                    let plan = construct_sketch(&dist, s, seed).ok()?;
                    let fit = fit_subsampled(x, y, &plan, &dist, &cfg.solver).ok()?;
                    if !fit.converged {
                        return None;
                    }
                    let metrics = compute_metrics(x, y, &full, &fit, &plan, &dist).ok()?;
                    Some((metrics, t.elapsed().as_secs_f64()))
                })
                .collect();

            let ok: Vec<&(MetricsRecord, f64)> = outcomes.iter().flatten().collect();
            let failed = cfg.repetitions - ok.len();

            let (mean, std, mean_seconds) = if ok.is_empty() {
                (
                    MetricsRecord::from_array([f64::NAN; 6]),
                    MetricsRecord::from_array([f64::NAN; 6]),
                    f64::NAN,
                )
            } else {
                let m = ok.len() as f64;
                let mut means = [Kahan::default(); 6];
                let mut secs = Kahan::default();
                for (rec, t) in ok.iter() {
                    for (acc, v) in means.iter_mut().zip(rec.as_array()) {
                        acc.add(v);
                    }
                    secs.add(*t);
                }
                let mean_arr: [f64; 6] = std::array::from_fn(|i| means[i].value() / m);
                let mut vars = [Kahan::default(); 6];
                for (rec, _) in ok.iter() {
                    for ((acc, v), mu) in vars.iter_mut().zip(rec.as_array()).zip(mean_arr) {
                        let dev = v - mu;
                        acc.add(dev * dev);
                    }
                }
                let std_arr: [f64; 6] = std::array::from_fn(|i| {
                    if ok.len() > 1 {
                        (vars[i].value() / (m - 1.0)).sqrt()
                    } else {
                        0.0
                    }
                });
                (
                    MetricsRecord::from_array(mean_arr),
                    MetricsRecord::from_array(std_arr),
                    secs.value() / m,
                )
            };

            cells.push(CellStats {
                scheme,
                sample_size: s,
                repetitions: cfg.repetitions,
                failed_repetitions: failed,
                mean,
                std,
                mean_fit_seconds: mean_seconds,
            });
        }
    }

    Ok(ExperimentReport {
        n,
        d: x.cols(),
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        baseline_misclass_rate: baseline_misclass,
        baseline_discrepancy,
        baseline_nll,
        baseline_iterations: full.iterations,
        cells,
        full_fit_seconds,
        leverage_seconds,
    })
}

/// A parsed experiment config file: dataset location and preprocessing,
/// sweep definition, and output destination.
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub dataset: DatasetSpec,
    pub experiment: ExperimentConfig,
    pub output: PathBuf,
    pub format: ReportFormat,
}

/// Parses the flat key-value experiment config format.
///
/// Lines are `key = value`; `#` starts a comment. Keys: `dataset`,
/// `label_column` (integers select by 0-based position, anything else by
/// name), `positive_label`, `standardize`, `add_intercept`, `schemes`
/// (comma-separated), `sample_sizes` (comma-separated), `repetitions`,
/// `seed`, `grad_tol`, `max_iter`, `output`, `format` (csv or json).
pub fn parse_file_config(text: &str) -> Result<FileConfig, ExperimentError> {
    let bad = |msg: String| ExperimentError::InvalidConfig(msg);

    let mut dataset_path: Option<PathBuf> = None;
    let mut label_column: Option<LabelColumn> = None;
    let mut positive_label: Option<String> = None;
    let mut standardize = true;
    let mut add_intercept = true;
    let mut experiment = ExperimentConfig::default();
    let mut output: Option<PathBuf> = None;
    let mut format = ReportFormat::Json;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key = value", line_no + 1)))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "dataset" => dataset_path = Some(PathBuf::from(value)),
            "label_column" => {
                label_column = Some(match value.parse::<usize>() {
                    Ok(idx) => LabelColumn::Index(idx),
                    Err(_) => LabelColumn::Name(value.to_string()),
                })
            }
            "positive_label" => positive_label = Some(value.to_string()),
            "standardize" => {
                standardize = parse_bool(value).ok_or_else(|| {
                    bad(format!("standardize must be true or false, got '{value}'"))
                })?
            }
            "add_intercept" => {
                add_intercept = parse_bool(value).ok_or_else(|| {
                    bad(format!(
                        "add_intercept must be true or false, got '{value}'"
                    ))
                })?
            }
            "schemes" => {
                let mut schemes = Vec::new();
                for token in value.split(',') {
                    let scheme = SamplingScheme::parse(token)
                        .ok_or_else(|| bad(format!("unknown scheme '{}'", token.trim())))?;
                    if !schemes.contains(&scheme) {
                        schemes.push(scheme);
                    }
                }
                experiment.schemes = schemes;
            }
            "sample_sizes" => {
                let mut sizes: Vec<usize> = Vec::new();
                for token in value.split(',') {
                    let s: usize = token
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("invalid sample size '{}'", token.trim())))?;
                    if !sizes.contains(&s) {
                        sizes.push(s);
                    }
                }
                experiment.sample_sizes = sizes;
            }
            "repetitions" => {
                experiment.repetitions = value
                    .parse()
                    .map_err(|_| bad(format!("invalid repetitions '{value}'")))?
            }
            "seed" => {
                experiment.seed = value
                    .parse()
                    .map_err(|_| bad(format!("invalid seed '{value}'")))?
            }
            "grad_tol" => {
                let t: f64 = value
                    .parse()
                    .map_err(|_| bad(format!("invalid grad_tol '{value}'")))?;
                experiment.solver.grad_tol = Some(t);
            }
            "max_iter" => {
                experiment.solver.max_iter = value
                    .parse()
                    .map_err(|_| bad(format!("invalid max_iter '{value}'")))?
            }
            "output" => output = Some(PathBuf::from(value)),
            "format" => {
                format = ReportFormat::parse(value)
                    .ok_or_else(|| bad(format!("format must be csv or json, got '{value}'")))?
            }
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }

    let dataset = DatasetSpec {
        path: dataset_path.ok_or_else(|| bad("missing required key 'dataset'".into()))?,
        label_column: label_column
            .ok_or_else(|| bad("missing required key 'label_column'".into()))?,
        positive_label: positive_label
            .ok_or_else(|| bad("missing required key 'positive_label'".into()))?,
        standardize,
        add_intercept,
    };
    if experiment.sample_sizes.is_empty() {
        return Err(bad("missing required key 'sample_sizes'".into()));
    }
    Ok(FileConfig {
        dataset,
        experiment,
        output: output.ok_or_else(|| bad("missing required key 'output'".into()))?,
        format,
    })
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}
