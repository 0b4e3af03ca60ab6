//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 at least one
//! bound check failed, 3 numerical or I/O failure.

mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

pub use report::{emit_report, format_sig12, render_reports, Format, ReportRow, CSV_COLUMNS};

use crate::complexity::complexity_profile;
use crate::error::{invalid, Error, Result};
use crate::estimators::{exp_weights, q_aggregation, FiniteClass, SolverConfig};
use crate::harness::checks::{DEFAULT_C1, DEFAULT_CEILING};
use crate::harness::spec::{Design, Prior};
use crate::harness::{self, instances, Estimator, ExperimentSpec, MCReport};
use crate::simplex::{ScoreVector, SimplexWeights};
use crate::vcclass::{singletons_projection, star_number_bruteforce, thresholds_projection, vc_dimension_bruteforce};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "agglab", version, about = "Aggregation estimators, entropic complexities and Monte Carlo bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Global and local complexities of a finite risk vector over a grid of temperatures.
    Complexity(ComplexityArgs),
    /// Aggregate weights for an explicit finite class read from JSON.
    Estimate(EstimateArgs),
    /// Monte Carlo summary of one estimator on an experiment spec.
    Experiment(ExperimentArgs),
    /// Monte Carlo check of a risk bound.
    Check(CheckArgs),
    /// VC dimension and star number of a projection class.
    Vc(VcArgs),
}

#[derive(Debug, Args)]
struct ComplexityArgs {
    /// Comma-separated risks.
    #[arg(long, value_delimiter = ',', required = true)]
    risks: Vec<f64>,
    /// Comma-separated prior probabilities (uniform when omitted).
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    /// Comma-separated increasing inverse temperatures.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    betas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Aggregate {
    Ew,
    Qagg,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// JSON file with `rows`, `y` and optional `prior`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "qagg")]
    estimator: Aggregate,
    /// Inverse temperature.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Solver KKT tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Solver iteration budget.
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

/// Options shared by the Monte Carlo commands.
#[derive(Debug, Args)]
struct RunArgs {
    /// Master seed for all random draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Confidence parameter of high-probability bounds.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Output file (standard output when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorName {
    Ew,
    Qagg,
    Progressive,
    PriorMean,
    Ridge,
    Fw,
    Truncated,
    Adaptive,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON experiment spec.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorName,
    /// Inverse temperature for ew and qagg.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Progressive mixture constant.
    #[arg(long, default_value_t = 8.0)]
    c: f64,
    /// Ridge regularization.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Truncation level for the truncated ridge predictor.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    FixedEw,
    FixedQ,
    RandomQ,
    ModelAgg,
    Ridge,
    Progressive,
    Sure,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    thm: CheckKind,
    /// JSON experiment spec; generated from the flags below when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample size.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Number of base predictors.
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    /// Noise level (fixed design).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Response bound (random design).
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Covariate dimension (ridge).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Support size (random design).
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Comma-separated ridge regularizations.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1")]
    lambda: Vec<f64>,
    /// Temperature constant of the random-design Q-aggregation check.
    #[arg(long, default_value_t = DEFAULT_C1)]
    c1: f64,
    /// Ceiling on implied universal constants.
    #[arg(long, default_value_t = DEFAULT_CEILING)]
    ceiling: f64,
    /// Excess risk of the bad predictors (model aggregation).
    #[arg(long, default_value_t = 1.0)]
    gap: f64,
    /// Comma-separated class sizes of the model-aggregation sweep.
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    sweep: Vec<usize>,
    /// Inverse temperature for the SURE check (n / (8 sigma^2) when 0).
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassName {
    Thresholds,
    Singletons,
}

#[derive(Debug, Args)]
struct VcArgs {
    #[arg(long, value_enum)]
    class: ClassName,
    /// Number of sample points.
    #[arg(long, default_value_t = 8)]
    m: usize,
}

/// Validated options of a Monte Carlo command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub replications: usize,
    pub delta: f64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    fn new(command: &str, config_path: Option<PathBuf>, run: &RunArgs) -> Result<Self> {
        if run.reps < 2 {
            return Err(invalid("--reps must be at least 2"));
        }
        if !(run.delta > 0.0 && run.delta < 1.0) {
            return Err(invalid("--delta must lie in (0, 1)"));
        }
        Ok(Self {
            command: command.to_string(),
            config_path,
            seed: run.seed,
            replications: run.reps,
            delta: run.delta,
            output_path: run.output.clone(),
            format: run.format,
        })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) | Error::TooLarge(_) => EXIT_USAGE,
        Error::NotPsd(_) | Error::Singular(_) | Error::NonConvergence { .. } | Error::Io(_) => EXIT_NUMERICAL,
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Applies command-line flags on top of a spec read from a file.
fn override_spec(spec: &mut ExperimentSpec, m: &ArgMatches, args: &CheckArgs) {
    if explicit(m, "seed") {
        spec.seed = args.run.seed;
    }
    match &mut spec.design {
        Design::Fixed(d) => {
            if explicit(m, "n") {
                d.n = args.n;
            }
            if explicit(m, "sigma") {
                d.sigma = args.sigma;
            }
        }
        Design::RandomDiscrete(d) => {
            if explicit(m, "n") {
                d.n = args.n;
            }
            if explicit(m, "b") {
                d.b = args.b;
            }
        }
    }
}

fn load_or_build(args: &CheckArgs, m: &ArgMatches, build: impl FnOnce() -> Result<ExperimentSpec>) -> Result<ExperimentSpec> {
    match &args.config {
        Some(path) => {
            let mut spec: ExperimentSpec = read_json(path)?;
            override_spec(&mut spec, m, args);
            Ok(spec)
        }
        None => build(),
    }
}

fn run_check(args: &CheckArgs, m: &ArgMatches) -> Result<(RunConfig, Vec<MCReport>)> {
    let cfg = RunConfig::new("check", args.config.clone(), &args.run)?;
    let solver = SolverConfig::default();
    let (seed, reps, delta) = (cfg.seed, cfg.replications, cfg.delta);
    let reports = match args.thm {
        CheckKind::FixedEw => {
            let spec = load_or_build(args, m, || Ok(instances::fixed_dictionary(args.n, args.m, args.sigma, seed)))?;
            vec![harness::check_thm_fixed_ew(&spec, reps)?]
        }
        CheckKind::FixedQ => {
            let spec = load_or_build(args, m, || Ok(instances::fixed_dictionary(args.n, args.m, args.sigma, seed)))?;
            vec![harness::check_thm_fixed_q(&spec, reps, delta, &solver)?]
        }
        CheckKind::Sure => {
            let spec = load_or_build(args, m, || Ok(instances::fixed_dictionary(args.n, args.m, args.sigma, seed)))?;
            let beta = (args.beta > 0.0).then_some(args.beta);
            vec![harness::check_sure_unbiased(&spec, reps, beta)?]
        }
        CheckKind::RandomQ => {
            let spec = load_or_build(args, m, || instances::random_dictionary(args.n, args.m, args.k, args.b, true, seed))?;
            vec![harness::check_thm_random_q(&spec, reps, delta, args.c1, args.ceiling, &solver)?]
        }
        CheckKind::Progressive => {
            let spec = load_or_build(args, m, || instances::random_dictionary(args.n, args.m, args.k, args.b, false, seed))?;
            vec![harness::check_progressive_mixture(&spec, reps)?]
        }
        CheckKind::Ridge => {
            let spec = load_or_build(args, m, || instances::linear_bounded(args.n, args.d, args.k, args.b, seed))?;
            harness::check_ridge_family(&spec, reps, &args.lambda)?
        }
        CheckKind::ModelAgg => {
            if args.config.is_some() {
                let spec = load_or_build(args, m, || unreachable!())?;
                vec![harness::check_model_aggregation(&spec, reps, delta, args.ceiling, &solver)?]
            } else {
                let specs = args
                    .sweep
                    .iter()
                    .map(|&size| instances::one_good_rest_bad(args.n, size, args.b, args.gap, seed))
                    .collect::<Result<Vec<_>>>()?;
                let sweep = harness::model_aggregation_sweep(&specs, reps, delta, &solver)?;
                let mut reports = sweep.reports;
                for r in &mut reports {
                    r.extras.insert("sweep_ratio".into(), sweep.ratio);
                    if !sweep.pass {
                        r.pass = Some(false);
                    }
                }
                reports
            }
        }
    };
    Ok((cfg, reports))
}

fn build_estimator(args: &ExperimentArgs) -> Estimator {
    match args.estimator {
        EstimatorName::Ew => Estimator::ExpWeights { beta: args.beta },
        EstimatorName::Qagg => Estimator::QAggregation { beta: args.beta },
        EstimatorName::Progressive => Estimator::ProgressiveMixture { c: args.c },
        EstimatorName::PriorMean => Estimator::PriorMean,
        EstimatorName::Ridge => Estimator::Ridge { lambda: args.lambda },
        EstimatorName::Fw => Estimator::ForsterWarmuth { lambda: args.lambda },
        EstimatorName::Truncated => Estimator::Truncated { lambda: args.lambda, b: args.b },
        EstimatorName::Adaptive => Estimator::AdaptiveTruncated { lambda: args.lambda },
    }
}

fn run_experiment(args: &ExperimentArgs, m: &ArgMatches) -> Result<(RunConfig, Vec<MCReport>)> {
    let cfg = RunConfig::new("experiment", Some(args.config.clone()), &args.run)?;
    let mut spec: ExperimentSpec = read_json(&args.config)?;
    if explicit(m, "seed") {
        spec.seed = cfg.seed;
    }
    let est = build_estimator(args);
    let levels = [0.5, 0.9, 1.0 - cfg.delta];
    let mut report = harness::mc_run(&spec, &est, cfg.replications, &levels)?;
    report.delta = Some(cfg.delta);
    report.empirical = report.mean;
    Ok((cfg, vec![report]))
}

#[derive(Debug, Deserialize)]
struct ClassFile {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    #[serde(default)]
    prior: Prior,
}

fn run_estimate(args: &EstimateArgs) -> Result<String> {
    let file: ClassFile = read_json(&args.config)?;
    let fc = FiniteClass::from_rows(&file.rows, &file.y)?;
    let pi = file.prior.build(fc.m())?;
    let (weights, objective) = match args.estimator {
        Aggregate::Ew => (exp_weights(&pi, &fc, args.beta)?, None),
        Aggregate::Qagg => {
            let cfg = SolverConfig { tol: args.tol, max_iter: args.max_iter, ..SolverConfig::default() };
            let res = q_aggregation(&pi, &fc, args.beta, &cfg)?.require_converged()?;
            (res.weights, Some(res.objective))
        }
    };
    let value = serde_json::json!({ "weights": weights.probs(), "objective": objective });
    Ok(format!("{value}\n"))
}

fn run_complexity(args: &ComplexityArgs) -> Result<String> {
    let risks = ScoreVector::risks(args.risks.clone())?;
    let pi = match &args.probs {
        Some(p) => SimplexWeights::from_probs(p)?,
        None => SimplexWeights::uniform(risks.len())?,
    };
    let profile = complexity_profile(&pi, &risks, &args.betas)?;
    let mut out = String::from("beta,global,local\n");
    for i in 0..profile.betas.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            format_sig12(profile.betas[i]),
            format_sig12(profile.global_values[i]),
            format_sig12(profile.local_values[i])
        ));
    }
    Ok(out)
}

fn run_vc(args: &VcArgs) -> Result<String> {
    let pc = match args.class {
        ClassName::Thresholds => thresholds_projection(&(0..args.m).map(|i| i as f64).collect::<Vec<_>>())?,
        ClassName::Singletons => singletons_projection(args.m)?,
    };
    let vc = vc_dimension_bruteforce(&pc)?;
    let star = star_number_bruteforce(&pc)?;
    Ok(format!("vc={vc}, star={star}\n"))
}

fn emit(cfg: &RunConfig, reports: &[MCReport]) -> Result<i32> {
    emit_report(reports, cfg.format, cfg.output_path.as_deref())?;
    Ok(if reports.iter().all(MCReport::passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn dispatch(cli: &Cli, matches: &ArgMatches) -> Result<i32> {
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand required");
    let print = |s: String| {
        print!("{s}");
        Ok(EXIT_OK)
    };
    match &cli.command {
        Command::Complexity(a) => print(run_complexity(a)?),
        Command::Estimate(a) => print(run_estimate(a)?),
        Command::Vc(a) => print(run_vc(a)?),
        Command::Experiment(a) => {
            let (cfg, reports) = run_experiment(a, sub)?;
            emit(&cfg, &reports)
        }
        Command::Check(a) => {
            let (cfg, reports) = run_check(a, sub)?;
            emit(&cfg, &reports)
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli, &matches) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("agglab: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        main(std::iter::once("agglab").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(&[]), EXIT_USAGE);
        assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
        assert_eq!(run(&["vc", "--class", "thresholds", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(&["check", "--thm", "fixed-ew", "--reps", "1"]), EXIT_USAGE);
        assert_eq!(run(&["check", "--thm", "fixed-ew", "--delta", "1.5"]), EXIT_USAGE);
    }

    #[test]
    fn help_lists_defaults() {
        let help = Cli::command()
            .find_subcommand_mut("check")
            .unwrap()
            .render_long_help()
            .to_string();
        for flag in ["--n", "--M", "--sigma", "--reps", "--seed", "--delta", "--b", "--d", "--k", "--c1", "--ceiling", "--gap", "--beta"] {
            let line = help.lines().skip_while(|l| !l.trim_start().starts_with(flag)).take(4).collect::<String>();
            assert!(line.contains("[default:"), "{flag} lacks a default in help");
        }
    }

    #[test]
    fn vc_command_succeeds() {
        assert_eq!(run_vc(&VcArgs { class: ClassName::Thresholds, m: 8 }).unwrap(), "vc=1, star=2\n");
        assert_eq!(run(&["vc", "--class", "singletons", "--m", "5"]), EXIT_OK);
    }

    #[test]
    fn complexity_command() {
        let out = run_complexity(&ComplexityArgs { risks: vec![0.0, 1.0], probs: None, betas: vec![1.0] }).unwrap();
        assert_eq!(out, "beta,global,local\n1,0.379885493042,0.26894142137\n");
    }

    #[test]
    fn unwritable_output_is_numerical_failure() {
        let code = run(&[
            "check", "--thm", "fixed-ew", "--n", "10", "--M", "2", "--reps", "2", "--output", "/nonexistent-dir/x.csv",
        ]);
        assert_eq!(code, EXIT_NUMERICAL);
    }
}
