//! Command-line entry point: `analyze` runs the interval estimator on a CSV
//! dataset, `simulate` runs seeded Monte Carlo coverage studies, and
//! `oracle-check` validates the outer-bound property on discrete instances.
//!
//! Reports are deterministic JSON documents: same inputs and seeds give
//! byte-identical output for any thread count.

mod ingest;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fusebounds::estimator::{
    infer, ols_coefficient_bounds, DecomposableEstimand, InferConfig, IntervalResult, OlsConfig,
};
use fusebounds::exec::{derive_seed, Parallelism};
use fusebounds::nuisance::learner::{LogGaussianLearner, RidgeLearner};
use fusebounds::nuisance::variance::VarianceMode;
use fusebounds::nuisance::{NuisanceConfig, PropensityConfig};
use fusebounds::oracle::{location_scale_instance, random_instance, BoundsSummary};
use fusebounds::sim::{run_monte_carlo, CoverageReport, DgpSpec};
use fusebounds::FusedDataset;

const TOOL_NAME: &str = "fusebounds";
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const ORACLE_TOLERANCE: f64 = 1e-10;

/// Exit codes are a stable contract: 0 success, 1 usage, 2 input validation,
/// 3 estimation failure.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Estimation(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = TOOL_NAME, version = TOOL_VERSION, about = "Partial-identification bounds for data-fusion estimands", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate bounds and a confidence interval on a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Run a seeded Monte Carlo coverage study on a built-in design.
    Simulate(SimulateArgs),
    /// Check the outer-bound sandwich and tightness properties on seeded
    /// discrete instances.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimandKind {
    Product,
    Ratio,
    ThresholdProduct,
    LinearContrast,
    /// OLS coefficient of z in the regression of y on (x, z).
    OlsCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerKind {
    Ridge,
    LogGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VarianceModeArg {
    Homoskedastic,
    Regression,
}

#[derive(Args, Debug, Clone)]
struct LearnerArgs {
    /// Mean/variance learner for both arms.
    #[arg(long, value_enum)]
    learner: Option<LearnerKind>,
    /// Conditional-variance mode for the ridge learner.
    #[arg(long, value_enum)]
    variance_mode: Option<VarianceModeArg>,
    /// Comma-separated ridge penalty grid (default: size-scaled wide grid).
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Inner cross-validation folds for learner tuning.
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Treat the propensity as known and equal to this constant.
    #[arg(long)]
    known_propensity: Option<f64>,
    /// Clip estimated propensities to [c, 1-c].
    #[arg(long)]
    clip_propensity: Option<f64>,
    /// Absolute conditional-variance floor (default: relative per fold).
    #[arg(long)]
    variance_floor: Option<f64>,
}

impl LearnerArgs {
    fn apply(&self, base: NuisanceConfig) -> Result<NuisanceConfig, CliError> {
        let mut config = base;
        let variance_mode = match self.variance_mode {
            Some(VarianceModeArg::Regression) => VarianceMode::Regression,
            _ => VarianceMode::Homoskedastic,
        };
        let cv_folds = self.cv_folds.unwrap_or(5);
        if cv_folds < 2 {
            return Err(CliError::Validation("cv-folds must be at least 2".into()));
        }
        if self.learner.is_some()
            || self.variance_mode.is_some()
            || self.lambda_grid.is_some()
            || self.cv_folds.is_some()
        {
            match self.learner.unwrap_or(LearnerKind::Ridge) {
                LearnerKind::Ridge => {
                    let learner = Arc::new(RidgeLearner {
                        lambda_grid: self.lambda_grid.clone(),
                        cv_folds,
                        variance_mode,
                    });
                    config.y_learner = learner.clone();
                    config.z_learner = learner;
                }
                LearnerKind::LogGaussian => {
                    let learner = Arc::new(LogGaussianLearner {
                        lambda_grid: self.lambda_grid.clone(),
                        cv_folds,
                    });
                    config.y_learner = learner.clone();
                    config.z_learner = learner;
                }
            }
        }
        if let Some(e) = self.known_propensity {
            if !(0.0 < e && e < 1.0) {
                return Err(CliError::Validation(
                    "known-propensity must lie in (0, 1)".into(),
                ));
            }
            config.propensity = PropensityConfig::known_constant(e);
        }
        if let Some(c) = self.clip_propensity {
            if !(0.0 < c && c < 0.5) {
                return Err(CliError::Validation(
                    "clip-propensity must lie in (0, 0.5)".into(),
                ));
            }
            config.propensity_clip = Some(c);
        }
        if let Some(f) = self.variance_floor {
            if !(f.is_finite() && f > 0.0) {
                return Err(CliError::Validation("variance-floor must be positive".into()));
            }
            config.variance_floor = Some(f);
        }
        Ok(config)
    }

    fn echo(&self, defaults: &str) -> LearnerEcho {
        LearnerEcho {
            learner: match self.learner {
                Some(LearnerKind::Ridge) => "ridge".into(),
                Some(LearnerKind::LogGaussian) => "log-gaussian".into(),
                None => defaults.into(),
            },
            variance_mode: match self.variance_mode {
                Some(VarianceModeArg::Regression) => "regression".into(),
                Some(VarianceModeArg::Homoskedastic) => "homoskedastic".into(),
                None => "homoskedastic".into(),
            },
            lambda_grid: self.lambda_grid.clone(),
            cv_folds: self.cv_folds.unwrap_or(5),
            known_propensity: self.known_propensity,
            clip_propensity: self.clip_propensity,
            variance_floor: self.variance_floor,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with header x1..xp, r, y, z.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "product")]
    estimand: EstimandKind,
    /// Threshold for y (threshold-product estimand).
    #[arg(long)]
    cy: Option<f64>,
    /// Threshold for z (threshold-product estimand).
    #[arg(long)]
    cz: Option<f64>,
    /// Constant term of the linear-contrast estimand.
    #[arg(long)]
    contrast_a: Option<f64>,
    /// Comma-separated covariate weights of the linear-contrast estimand.
    #[arg(long, value_delimiter = ',')]
    contrast_b: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    k_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: FUSEBOUNDS_THREADS, then machine parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpecKind {
    HeavyTail,
    Gaussian,
    Lognormal,
    Validation,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    spec: SpecKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Master seed (required; replications derive independent streams).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    k_folds: usize,
    #[arg(long, default_value_t = 20)]
    p_x: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma_y: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma_z: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    #[arg(long, default_value_t = 0.3)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_eps: f64,
    #[arg(long, default_value_t = 1)]
    beta_seed: u64,
    /// Sweep sigma_y over these values (heavy-tail and gaussian specs).
    #[arg(long, value_delimiter = ',')]
    sweep_sigma_y: Option<Vec<f64>>,
    /// Sweep sigma over these values (lognormal spec).
    #[arg(long, value_delimiter = ',')]
    sweep_sigma: Option<Vec<f64>>,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    /// Number of random discrete instances for the sandwich property.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Number of location-scale instances for the tightness property.
    #[arg(long, default_value_t = 50)]
    location_scale: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

impl ToolInfo {
    fn current() -> Self {
        Self { name: TOOL_NAME, version: TOOL_VERSION }
    }
}

#[derive(Serialize)]
struct LearnerEcho {
    learner: String,
    variance_mode: String,
    lambda_grid: Option<Vec<f64>>,
    cv_folds: usize,
    known_propensity: Option<f64>,
    clip_propensity: Option<f64>,
    variance_floor: Option<f64>,
}

#[derive(Serialize)]
struct AnalyzeConfigEcho {
    data: String,
    estimand: String,
    alpha: f64,
    k_folds: usize,
    seed: u64,
    learner: LearnerEcho,
}

#[derive(Serialize)]
struct DatasetSummary {
    n: usize,
    p_x: usize,
    n_y_arm: usize,
    n_z_arm: usize,
}

#[derive(Serialize)]
struct AnalyzeReport {
    tool: ToolInfo,
    command: &'static str,
    config: AnalyzeConfigEcho,
    dataset: DatasetSummary,
    interval: IntervalResult,
}

#[derive(Serialize)]
struct SimulateConfigEcho {
    spec: DgpSpec,
    n: usize,
    reps: usize,
    alpha: f64,
    k_folds: usize,
    seed: u64,
    learner: LearnerEcho,
}

#[derive(Serialize)]
struct SweepRow {
    parameter: f64,
    coverage: f64,
    coverage_mc_halfwidth: f64,
    lcb_coverage: f64,
    ucb_coverage: f64,
    mean_width: f64,
    width_mc_halfwidth: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    tool: ToolInfo,
    command: &'static str,
    config: SimulateConfigEcho,
    sweep: Option<Vec<SweepRow>>,
    results: Vec<CoverageReport>,
}

#[derive(Serialize)]
struct OracleViolation {
    kind: &'static str,
    seed: u64,
    value: f64,
    bounds: BoundsSummary,
}

#[derive(Serialize)]
struct OracleCheckReport {
    tool: ToolInfo,
    command: &'static str,
    instances: usize,
    location_scale_instances: usize,
    seed: u64,
    tolerance: f64,
    max_sandwich_violation: f64,
    max_tightness_gap: f64,
    violations: Vec<OracleViolation>,
    pass: bool,
}

fn resolve_parallelism(threads: Option<usize>) -> Result<Parallelism, CliError> {
    let from_env = || {
        std::env::var("FUSEBOUNDS_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::Validation(format!("FUSEBOUNDS_THREADS is not a thread count: {v:?}"))
                })
            })
            .transpose()
    };
    let resolved = match threads {
        Some(t) => Some(t),
        None => from_env()?,
    };
    Ok(match resolved {
        Some(0) => {
            return Err(CliError::Validation("thread count must be positive".into()));
        }
        Some(1) => Parallelism::Sequential,
        Some(t) => Parallelism::Threads(t),
        None => Parallelism::Auto,
    })
}

fn write_report<T: Serialize>(report: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Estimation(format!("report serialization failed: {e}")))?;
    body.push('\n');
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn estimand_label(args: &AnalyzeArgs) -> String {
    match args.estimand {
        EstimandKind::Product => "product".into(),
        EstimandKind::Ratio => "ratio".into(),
        EstimandKind::ThresholdProduct => format!(
            "threshold-product(cy={}, cz={})",
            args.cy.unwrap_or(f64::NAN),
            args.cz.unwrap_or(f64::NAN)
        ),
        EstimandKind::LinearContrast => "linear-contrast".into(),
        EstimandKind::OlsCoefficient => "ols-coefficient".into(),
    }
}

fn build_estimand(args: &AnalyzeArgs, p_x: usize) -> Result<DecomposableEstimand, CliError> {
    match args.estimand {
        EstimandKind::Product => Ok(DecomposableEstimand::product()),
        EstimandKind::Ratio => Ok(DecomposableEstimand::ratio()),
        EstimandKind::ThresholdProduct => {
            let (cy, cz) = match (args.cy, args.cz) {
                (Some(cy), Some(cz)) => (cy, cz),
                _ => {
                    return Err(CliError::Usage(
                        "threshold-product requires --cy and --cz".into(),
                    ))
                }
            };
            Ok(DecomposableEstimand::threshold_product(cy, cz))
        }
        EstimandKind::LinearContrast => {
            let a = args.contrast_a.ok_or_else(|| {
                CliError::Usage("linear-contrast requires --contrast-a".into())
            })?;
            let b = args.contrast_b.clone().ok_or_else(|| {
                CliError::Usage("linear-contrast requires --contrast-b".into())
            })?;
            if b.len() != p_x {
                return Err(CliError::Validation(format!(
                    "contrast-b has {} weights but the data has {} covariates",
                    b.len(),
                    p_x
                )));
            }
            Ok(DecomposableEstimand::linear_contrast(a, b))
        }
        EstimandKind::OlsCoefficient => unreachable!("handled separately"),
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(CliError::Validation(format!(
            "alpha must lie in (0, 1], got {}",
            args.alpha
        )));
    }
    if args.k_folds < 2 {
        return Err(CliError::Validation("k-folds must be at least 2".into()));
    }
    resolve_parallelism(args.threads)?;

    let data: FusedDataset = ingest::ingest_csv(&args.data)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let nuisance = args.learner.apply(NuisanceConfig::default())?;
    let config = InferConfig {
        k_folds: args.k_folds,
        alpha: args.alpha,
        seed: args.seed,
        nuisance,
    };

    let interval = if args.estimand == EstimandKind::OlsCoefficient {
        let ols = OlsConfig { infer: config, ..OlsConfig::default() };
        ols_coefficient_bounds(&data, &ols)
            .map_err(|e| CliError::Estimation(e.to_string()))?
    } else {
        let estimand = build_estimand(args, data.p_x())?;
        infer(&data, &estimand, &config).map_err(|e| CliError::Estimation(e.to_string()))?
    };

    let report = AnalyzeReport {
        tool: ToolInfo::current(),
        command: "analyze",
        config: AnalyzeConfigEcho {
            data: args.data.display().to_string(),
            estimand: estimand_label(args),
            alpha: args.alpha,
            k_folds: args.k_folds,
            seed: args.seed,
            learner: args.learner.echo("ridge"),
        },
        dataset: DatasetSummary {
            n: data.n(),
            p_x: data.p_x(),
            n_y_arm: data.n_y_arm(),
            n_z_arm: data.n_z_arm(),
        },
        interval,
    };
    write_report(&report, args.out.as_ref())
}

fn build_spec(args: &SimulateArgs) -> (DgpSpec, &'static str) {
    match args.spec {
        SpecKind::HeavyTail => (
            DgpSpec::HeavyTailLinear {
                p_x: args.p_x,
                sigma_y: args.sigma_y,
                sigma_z: args.sigma_z,
                beta_seed: args.beta_seed,
            },
            "ridge",
        ),
        SpecKind::Gaussian => (
            DgpSpec::GaussianLinear {
                p_x: args.p_x,
                sigma_y: args.sigma_y,
                sigma_z: args.sigma_z,
                beta_seed: args.beta_seed,
            },
            "ridge",
        ),
        SpecKind::Lognormal => (
            DgpSpec::LogNormalRelative {
                p_x: args.p_x,
                sigma: args.sigma,
                rho: args.rho,
                beta_seed: args.beta_seed,
            },
            "log-gaussian",
        ),
        SpecKind::Validation => (
            DgpSpec::ValidationStudy {
                tau: args.tau,
                sigma_eps: args.sigma_eps,
                beta1: 1.0,
                beta2: 1.0,
                rho: args.rho,
                sigma: args.sigma,
            },
            "ridge",
        ),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(CliError::Validation(format!(
            "alpha must lie in (0, 1], got {}",
            args.alpha
        )));
    }
    let parallelism = resolve_parallelism(args.threads)?;
    let (base_spec, default_learner) = build_spec(args);
    base_spec
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;

    // Sweep points: vary one noise parameter of the base spec.
    let mut points: Vec<(f64, DgpSpec)> = Vec::new();
    match (&args.sweep_sigma_y, &args.sweep_sigma) {
        (Some(values), None) => {
            for &v in values {
                let spec = match base_spec.clone() {
                    DgpSpec::HeavyTailLinear { p_x, sigma_z, beta_seed, .. } => {
                        DgpSpec::HeavyTailLinear { p_x, sigma_y: v, sigma_z, beta_seed }
                    }
                    DgpSpec::GaussianLinear { p_x, sigma_z, beta_seed, .. } => {
                        DgpSpec::GaussianLinear { p_x, sigma_y: v, sigma_z, beta_seed }
                    }
                    _ => {
                        return Err(CliError::Usage(
                            "--sweep-sigma-y applies to heavy-tail and gaussian specs".into(),
                        ))
                    }
                };
                points.push((v, spec));
            }
        }
        (None, Some(values)) => {
            for &v in values {
                let spec = match base_spec.clone() {
                    DgpSpec::LogNormalRelative { p_x, rho, beta_seed, .. } => {
                        DgpSpec::LogNormalRelative { p_x, sigma: v, rho, beta_seed }
                    }
                    DgpSpec::ValidationStudy { tau, sigma_eps, beta1, beta2, rho, .. } => {
                        DgpSpec::ValidationStudy { tau, sigma_eps, beta1, beta2, rho, sigma: v }
                    }
                    _ => {
                        return Err(CliError::Usage(
                            "--sweep-sigma applies to lognormal and validation specs".into(),
                        ))
                    }
                };
                points.push((v, spec));
            }
        }
        (None, None) => {}
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "pass at most one of --sweep-sigma-y and --sweep-sigma".into(),
            ))
        }
    }
    let sweeping = !points.is_empty();
    if !sweeping {
        points.push((f64::NAN, base_spec.clone()));
    }

    let mut results = Vec::with_capacity(points.len());
    let mut sweep_rows = Vec::with_capacity(points.len());
    for (idx, (parameter, spec)) in points.iter().enumerate() {
        let point_seed = if sweeping { derive_seed(args.seed, idx as u64) } else { args.seed };
        let mut config = spec.default_infer_config(args.alpha, point_seed);
        config.k_folds = args.k_folds;
        config.nuisance = args.learner.apply(config.nuisance)?;
        let report = run_monte_carlo(
            spec,
            args.n,
            args.reps,
            &config,
            args.alpha,
            point_seed,
            parallelism,
        )
        .map_err(|e| CliError::Estimation(e.to_string()))?;
        sweep_rows.push(SweepRow {
            parameter: *parameter,
            coverage: report.coverage,
            coverage_mc_halfwidth: 1.96 * report.coverage_se,
            lcb_coverage: report.lcb_coverage,
            ucb_coverage: report.ucb_coverage,
            mean_width: report.mean_width,
            width_mc_halfwidth: 1.96 * report.width_se,
        });
        results.push(report);
    }

    let report = SimulateReport {
        tool: ToolInfo::current(),
        command: "simulate",
        config: SimulateConfigEcho {
            spec: base_spec,
            n: args.n,
            reps: args.reps,
            alpha: args.alpha,
            k_folds: args.k_folds,
            seed: args.seed,
            learner: args.learner.echo(default_learner),
        },
        sweep: sweeping.then_some(sweep_rows),
        results,
    };
    write_report(&report, args.out.as_ref())
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<(), CliError> {
    if args.instances == 0 && args.location_scale == 0 {
        return Err(CliError::Usage(
            "nothing to check: both --instances and --location-scale are zero".into(),
        ));
    }

    let mut violations = Vec::new();
    let mut max_sandwich: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for i in 0..args.instances {
        let seed = derive_seed(args.seed, i as u64);
        let bounds = BoundsSummary::of(&random_instance(seed));
        let violation = bounds.sandwich_violation();
        max_sandwich = max_sandwich.max(violation);
        if violation > ORACLE_TOLERANCE {
            violations.push(OracleViolation { kind: "sandwich", seed, value: violation, bounds });
        }
    }
    for i in 0..args.location_scale {
        let seed = derive_seed(args.seed, (args.instances + i) as u64);
        let bounds = BoundsSummary::of(&location_scale_instance(seed));
        let gap = bounds.tightness_gap();
        max_gap = max_gap.max(gap);
        if gap > ORACLE_TOLERANCE {
            violations.push(OracleViolation { kind: "tightness", seed, value: gap, bounds });
        }
    }

    let pass = violations.is_empty();
    let report = OracleCheckReport {
        tool: ToolInfo::current(),
        command: "oracle-check",
        instances: args.instances,
        location_scale_instances: args.location_scale,
        seed: args.seed,
        tolerance: ORACLE_TOLERANCE,
        max_sandwich_violation: max_sandwich,
        max_tightness_gap: max_gap,
        violations,
        pass,
    };
    write_report(&report, args.out.as_ref())?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Estimation("oracle property violations detected".into()))
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // Help and version requests are successful exits.
        if e.kind() == clap::error::ErrorKind::DisplayHelp
            || e.kind() == clap::error::ErrorKind::DisplayVersion
        {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::Usage(e.to_string())
    })?;
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.message());
            std::process::exit(err.code());
        }
    }
}
