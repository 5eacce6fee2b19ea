//! Command-line interface: full and subsampled fits on CSV data, the seeded
//! experiment sweep, Monte Carlo verification suites, and the sample-size
//! rule.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 baseline divergence,
//! 4 internal numerical failure (including failed verification suites).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use sublogit::analysis::{
    verify_conditions, verify_probability_bound, verify_unbiasedness, verify_variance_bound,
    AnalysisError, ConditionProbe, FrequencyReport, MonteCarloSummary,
};
use sublogit::dataset::{load_dataset, DatasetSpec, LabelColumn};
use sublogit::experiment::{parse_file_config, run_experiment, ExperimentError};
use sublogit::linalg::{leverage_scores, orthonormal_basis};
use sublogit::logreg::{fit_full, fit_subsampled, LogisticFit, ResponseVector, SolverConfig};
use sublogit::report::emit_report;
use sublogit::sketch::{construct_sketch, make_distribution, required_sample_size, SamplingScheme};
use sublogit::synth::gaussian_instance;

#[derive(Parser)]
#[command(
    name = "sublogit",
    version,
    about = "Subsampled logistic regression via leverage-score row sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the full-data MLE on a CSV dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// One subsampled fit: sketch s rows under a sampling scheme and fit.
    SketchFit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Sampling scheme: uniform, leverage, or l2s.
        #[arg(long, default_value = "leverage")]
        scheme: String,
        /// Number of sampled rows.
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full sweep described by a config file and write the report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a Monte Carlo verification suite on synthetic data.
    Verify {
        /// One of: unbiased, variance, conditions, theorem1.
        #[arg(long)]
        suite: String,
        /// Rows of the synthetic instance (defaults depend on the suite).
        #[arg(long)]
        n: Option<usize>,
        /// Columns of the synthetic instance.
        #[arg(long)]
        d: Option<usize>,
        /// Sample size for the unbiased/variance suites.
        #[arg(long)]
        s: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Sampling scheme for the conditions/theorem1 suites.
        #[arg(long, default_value = "leverage")]
        scheme: String,
        /// Probe vector for the conditions suite: fitted-delta or random-unit.
        #[arg(long, default_value = "fitted-delta")]
        probe: String,
    },
    /// Print the sample size ceil(8 d / (delta * eps^2)).
    SampleSize {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV (RFC-4180, header row).
    #[arg(long)]
    data: PathBuf,
    /// Label column, by name or 0-based index.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Token mapped to class 1.
    #[arg(long, default_value = "1")]
    positive_label: String,
    /// Skip per-column standardization.
    #[arg(long)]
    no_standardize: bool,
    /// Skip the leading intercept column.
    #[arg(long)]
    no_intercept: bool,
}

impl DataArgs {
    fn to_spec(&self) -> DatasetSpec {
        let label_column = match self.label_column.parse::<usize>() {
            Ok(idx) => LabelColumn::Index(idx),
            Err(_) => LabelColumn::Name(self.label_column.clone()),
        };
        DatasetSpec {
            path: self.data.clone(),
            label_column,
            positive_label: self.positive_label.clone(),
            standardize: !self.no_standardize,
            add_intercept: !self.no_intercept,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Score-norm tolerance; defaults to 1e-8 * sqrt(n).
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl SolverArgs {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

/// Failure classes mapped onto process exit codes.
enum CliError {
    /// Exit 2: unreadable/unparseable input or invalid configuration.
    Input(String),
    /// Exit 3: the full-data MLE does not exist or did not converge.
    Baseline(String),
    /// Exit 4: numerical failure or a failed verification suite.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Baseline(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Baseline(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<sublogit::dataset::DatasetError> for CliError {
    fn from(e: sublogit::dataset::DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<sublogit::logreg::LogregError> for CliError {
    fn from(e: sublogit::logreg::LogregError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<sublogit::linalg::LinalgError> for CliError {
    fn from(e: sublogit::linalg::LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<sublogit::sketch::SketchError> for CliError {
    fn from(e: sublogit::sketch::SketchError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::BaselineDiverged => CliError::Baseline(e.to_string()),
            ExperimentError::InvalidConfig(_) => CliError::Input(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::FullFitDiverged => CliError::Baseline(e.to_string()),
            AnalysisError::InvalidRange { .. } | AnalysisError::TooFewTrials { .. } => {
                CliError::Input(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<sublogit::report::ReportError> for CliError {
    fn from(e: sublogit::report::ReportError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { data, solver } => cmd_fit(&data, &solver),
        Command::SketchFit {
            data,
            solver,
            scheme,
            s,
            seed,
        } => cmd_sketch_fit(&data, &solver, &scheme, s, seed),
        Command::Experiment { config } => cmd_experiment(&config),
        Command::Verify {
            suite,
            n,
            d,
            s,
            eps,
            delta,
            trials,
            seed,
            scheme,
            probe,
        } => cmd_verify(&suite, n, d, s, eps, delta, trials, seed, &scheme, &probe),
        Command::SampleSize { d, eps, delta } => {
            let s = required_sample_size(d, eps, delta)?;
            println!("{s}");
            Ok(())
        }
    }
}

fn print_fit(label: &str, fit: &LogisticFit, y: &ResponseVector) {
    let n = fit.probs.len();
    let misclass = y
        .values()
        .iter()
        .zip(fit.probs.iter())
        .filter(|(&yi, &pi)| (if pi >= 0.5 { 1.0 } else { 0.0 }) != yi)
        .count() as f64
        / n as f64;
    let residual = &y.values() - &fit.probs;
    let discrepancy = residual.dot(&residual).sqrt();
    println!("{label}:");
    println!("  converged       = {}", fit.converged);
    println!("  iterations      = {}", fit.iterations);
    println!("  score norm      = {:.6e}", fit.final_grad_norm);
    println!("  misclass rate   = {:.6}", misclass);
    println!("  discrepancy     = {:.6e}", discrepancy);
    let beta: Vec<String> = fit
        .beta
        .values()
        .iter()
        .map(|b| format!("{b:.8e}"))
        .collect();
    println!("  beta            = [{}]", beta.join(", "));
}

fn cmd_fit(data: &DataArgs, solver: &SolverArgs) -> Result<(), CliError> {
    let (x, y) = load_dataset(&data.to_spec())?;
    println!("loaded {} rows x {} columns", x.rows(), x.cols());
    let fit = fit_full(&x, &y, &solver.to_config())?;
    print_fit("full-data MLE", &fit, &y);
    if !fit.converged {
        return Err(CliError::Baseline(
            "full-data MLE did not converge (possibly separable data)".into(),
        ));
    }
    Ok(())
}

fn parse_scheme(text: &str) -> Result<SamplingScheme, CliError> {
    SamplingScheme::parse(text).ok_or_else(|| CliError::Input(format!("unknown scheme '{text}'")))
}

fn cmd_sketch_fit(
    data: &DataArgs,
    solver: &SolverArgs,
    scheme: &str,
    s: usize,
    seed: u64,
) -> Result<(), CliError> {
    let scheme = parse_scheme(scheme)?;
    let (x, y) = load_dataset(&data.to_spec())?;
    println!("loaded {} rows x {} columns", x.rows(), x.cols());
    let cfg = solver.to_config();

    let full = fit_full(&x, &y, &cfg)?;
    if !full.converged {
        return Err(CliError::Baseline(
            "full-data MLE did not converge; no baseline to compare against".into(),
        ));
    }
    let basis = orthonormal_basis(&x)?;
    let scores = leverage_scores(&basis);
    let dist = make_distribution(scheme, Some(&scores), x.rows())?;
    let plan = construct_sketch(&dist, s, seed)?;
    let sub = fit_subsampled(&x, &y, &plan, &dist, &cfg)?;

    print_fit("full-data MLE", &full, &y);
    print_fit(
        &format!("subsampled MLE ({} rows, {} scheme)", s, scheme.label()),
        &sub,
        &y,
    );
    let metrics = sublogit::analysis::compute_metrics(&x, &y, &full, &sub, &plan, &dist)?;
    println!("comparison:");
    println!("  rel prob err    = {:.6e}", metrics.rel_prob_err);
    println!("  misclass rate   = {:.6}", metrics.misclass_rate);
    println!("  rel nll (full)  = {:.6e}", metrics.rel_nll_full);
    println!("  rel nll (sub)   = {:.6e}", metrics.rel_nll_sub);
    Ok(())
}

fn cmd_experiment(config_path: &PathBuf) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", config_path.display())))?;
    let file_cfg = parse_file_config(&text)?;
    let (x, y) = load_dataset(&file_cfg.dataset)?;
    println!("loaded {} rows x {} columns", x.rows(), x.cols());

    let report = run_experiment(&x, &y, &file_cfg.experiment)?;
    println!(
        "baseline: misclass {:.4}, discrepancy {:.4e}, {} iterations ({:.2}s fit, {:.2}s leverage)",
        report.baseline_misclass_rate,
        report.baseline_discrepancy,
        report.baseline_iterations,
        report.full_fit_seconds,
        report.leverage_seconds
    );
    for cell in &report.cells {
        println!(
            "{:>8} s={:<6} rel_prob_err {:.4e} (+/- {:.4e})  misclass {:.4}  [{} ok, {} failed, {:.3}s/fit]",
            cell.scheme.label(),
            cell.sample_size,
            cell.mean.rel_prob_err,
            cell.std.rel_prob_err,
            cell.mean.misclass_rate,
            cell.repetitions - cell.failed_repetitions,
            cell.failed_repetitions,
            cell.mean_fit_seconds
        );
    }
    emit_report(&report, file_cfg.format, &file_cfg.output)?;
    println!("report written to {}", file_cfg.output.display());
    Ok(())
}

fn print_mc(name: &str, summary: &MonteCarloSummary) {
    let status = if summary.pass { "PASS" } else { "FAIL" };
    println!(
        "{status} {name}: empirical {:.6e} vs bound {:.6e} (se {:.3e}, {} trials)",
        summary.empirical_mean, summary.bound, summary.standard_error, summary.trials
    );
}

fn print_freq(name: &str, report: &FrequencyReport) {
    let status = if report.pass { "PASS" } else { "FAIL" };
    println!(
        "{status} {name}: {}/{} trials ({:.4}) vs required {:.4} ({} failed fits, {} corollary failures)",
        report.successes,
        report.trials,
        report.success_fraction,
        report.required_fraction,
        report.failed_fits,
        report.corollary_failures
    );
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    suite: &str,
    n: Option<usize>,
    d: Option<usize>,
    s: Option<usize>,
    eps: f64,
    delta: f64,
    trials: Option<usize>,
    seed: u64,
    scheme: &str,
    probe: &str,
) -> Result<(), CliError> {
    let scheme = parse_scheme(scheme)?;
    let cfg = SolverConfig::default();
    match suite {
        "unbiased" | "variance" => {
            let n = n.unwrap_or(500);
            let d = d.unwrap_or(4);
            let trials = trials.unwrap_or(20_000);
            let (x, _) = gaussian_instance(n, d, false, 0.8, seed ^ 0x5EED);
            let basis = orthonormal_basis(&x)?;
            let probe_vec = probe_vector(n, seed);
            if suite == "unbiased" {
                let srows = s.unwrap_or(50);
                let scores = leverage_scores(&basis);
                let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), n)?;
                let summary =
                    verify_unbiasedness(&basis, probe_vec.view(), &dist, srows, trials, seed)?;
                print_mc("estimator unbiasedness (worst z-score vs 4)", &summary);
                fail_unless(summary.pass)
            } else {
                let srows = s.unwrap_or(40);
                let leverage =
                    verify_variance_bound(&basis, probe_vec.view(), srows, trials, seed, None)?;
                print_mc("variance bound, leverage sampling", &leverage);
                let uniform_dist = make_distribution(SamplingScheme::Uniform, None, n)?;
                let general = verify_variance_bound(
                    &basis,
                    probe_vec.view(),
                    srows,
                    trials,
                    seed,
                    Some(&uniform_dist),
                )?;
                print_mc("variance bound, general distribution", &general);
                fail_unless(leverage.pass && general.pass)
            }
        }
        "conditions" => {
            let n = n.unwrap_or(5000);
            let d = d.unwrap_or(10);
            let trials = trials.unwrap_or(1000);
            let probe = ConditionProbe::parse(probe)
                .ok_or_else(|| CliError::Input(format!("unknown probe '{probe}'")))?;
            let (x, y) = gaussian_instance(n, d, false, 0.5, seed ^ 0x5EED);
            let s_used = required_sample_size(d, eps, delta)?;
            println!(
                "structural conditions at s = {s_used} (n = {n}, d = {d}, eps = {eps}, delta = {delta})"
            );
            let report = verify_conditions(&x, &y, scheme, eps, delta, trials, seed, &cfg, probe)?;
            print_freq("joint structural conditions", &report);
            fail_unless(report.pass)
        }
        "theorem1" => {
            let n = n.unwrap_or(5000);
            let d = d.unwrap_or(10);
            let trials = trials.unwrap_or(200);
            let (x, y) = gaussian_instance(n, d, false, 0.5, seed ^ 0x5EED);
            let s_used = required_sample_size(d, eps, delta)?;
            println!(
                "probability bound at s = {s_used} (n = {n}, d = {d}, eps = {eps}, delta = {delta})"
            );
            let report = verify_probability_bound(&x, &y, scheme, eps, delta, trials, seed, &cfg)?;
            print_freq("estimated-probability bound", &report);
            fail_unless(report.pass)
        }
        other => Err(CliError::Input(format!(
            "unknown suite '{other}'; expected unbiased, variance, conditions, or theorem1"
        ))),
    }
}

fn probe_vector(n: usize, seed: u64) -> ndarray::Array1<f64> {
    // A fixed smooth probe with both signs; any deterministic vector works.
    ndarray::Array1::from_shape_fn(n, |i| {
        let t = (i as f64 + 1.0) / n as f64;
        (std::f64::consts::TAU * t + seed as f64 % 7.0).sin()
    })
}

fn fail_unless(pass: bool) -> Result<(), CliError> {
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical("verification suite failed".into()))
    }
}
