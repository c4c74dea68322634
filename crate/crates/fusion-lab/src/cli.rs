//! Command-line front end: single fusions, exact-oracle runs, Monte Carlo
//! sweeps, and paired mp-versus-optimal comparisons.
//!
//! Exit codes: 0 on success, 2 for configuration, parsing, or input errors,
//! 3 for numeric failures inside the fusion engine. Sweep results are CSV
//! tables whose parameter columns round-trip exactly through their printed
//! representation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::baselines::{hard_isolation_fuse, majority_fuse, soft_isolation_fuse};
use crate::exact::{exact_bitwise_map, exact_joint_enumeration, ExactError, ExactResult};
use crate::experiment::{
    estimate_error_probability, estimate_paired, ExperimentConfig, ExperimentError, Scheme,
};
use crate::model::{ModelError, ModelParams, ReportMatrix};
use crate::mp::{fuse_mp, MpError};

/// Environment variable consulted when `--workers` is not given.
pub const WORKERS_ENV: &str = "FUSION_LAB_WORKERS";

const CSV_HEADER: &str =
    "scheme,n,m,epsilon,rho,alpha,pmal,pmal_fc,trials,pe,ci_low,ci_high,mean_iters,seed";
const COMPARE_HEADER: &str = "n,m,epsilon,rho,alpha,pmal,pmal_fc,trials,pe_mp,pe_opt,pe_gap,\
                              differing_fraction,mean_iters,seed";

/// Parses `args` (including the program name) and runs the selected command.
///
/// Returns the process exit code instead of exiting, so tests can drive the
/// interface in process.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.exit_code() == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli) {
        Ok(output) => {
            print!("{output}");
            0
        }
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(CliError::Numeric(message)) => {
            eprintln!("error: {message}");
            3
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fusion-lab",
    about = "Decision fusion for multi-sensor networks with Byzantine nodes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse one report matrix and print decisions and posteriors.
    Fuse(FuseArgs),
    /// Run the exact enumeration oracle on one report matrix.
    Oracle(OracleArgs),
    /// Estimate error probabilities over a parameter grid, as CSV.
    Simulate(SimulateArgs),
    /// Run mp and the exact rule on identical draws, as CSV.
    Compare(CompareArgs),
}

#[derive(Args)]
struct FuseArgs {
    /// Report matrix file: m lines of n space-separated 0/1 entries.
    input: PathBuf,
    /// Fusion rule: mp, optimal, majority, hard, or soft.
    #[arg(long, default_value = "mp")]
    scheme: String,
    #[command(flatten)]
    shape: ShapeFlags,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    mp: MpFlags,
    /// Isolation threshold for the hard scheme.
    #[arg(long, default_value_t = 0.325)]
    delta_iso: f64,
    /// Seed for tie-breaking coins in the baseline schemes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit one JSON object instead of human-readable lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Report matrix file: m lines of n space-separated 0/1 entries.
    input: PathBuf,
    /// Use full joint enumeration instead of the windowed sweep.
    #[arg(long)]
    joint: bool,
    #[command(flatten)]
    shape: ShapeFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Emit one JSON object instead of human-readable lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Fusion rules to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "mp")]
    schemes: Vec<String>,
    /// Nodes reporting to the fusion center.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Observation window length.
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    mp: MpFlags,
    /// Isolation threshold for the hard scheme.
    #[arg(long, default_value_t = 0.325)]
    delta_iso: f64,
    /// Trials per grid point.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Master seed; trial streams are derived from it by counter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep one variable: VAR=START:STEP:STOP with VAR one of
    /// n, m, epsilon, rho, alpha, pmal.
    #[arg(long)]
    sweep: Option<String>,
    /// Write the CSV table here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for trial parallelism (env FUSION_LAB_WORKERS as
    /// fallback; all cores when absent).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Nodes reporting to the fusion center.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Observation window length; capped by the exact oracle.
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    mp: MpFlags,
    /// Trials per grid point.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Master seed; trial streams are derived from it by counter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep one variable: VAR=START:STEP:STOP with VAR one of
    /// n, m, epsilon, rho, alpha, pmal.
    #[arg(long)]
    sweep: Option<String>,
    /// Write the CSV table here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for trial parallelism (env FUSION_LAB_WORKERS as
    /// fallback; all cores when absent).
    #[arg(long)]
    workers: Option<usize>,
}

/// Optional dimension checks for commands that read the matrix from a file.
#[derive(Args)]
struct ShapeFlags {
    /// Expected window length; must match the input file when given.
    #[arg(long)]
    m: Option<usize>,
    /// Expected node count; must match the input file when given.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ModelFlags {
    /// Local decision error probability of every node.
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    /// State persistence probability; 0.5 gives independent states.
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    /// Probability that a node is Byzantine.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Byzantine flip probability used to generate reports. Accepts a
    /// comma-separated list in simulate, producing one grid slice per value.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pmal: Vec<f64>,
    /// Byzantine flip probability assumed by the fusion center; follows
    /// --pmal when omitted.
    #[arg(long)]
    pmal_fc: Option<f64>,
}

#[derive(Args)]
struct MpFlags {
    /// Message-passing iteration budget.
    #[arg(long, default_value_t = 5)]
    iters: usize,
    /// Message-passing convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Debug)]
enum CliError {
    /// Invalid flags, unparsable input, or file system trouble: exit 2.
    Config(String),
    /// Numeric breakdown inside the fusion engine: exit 3.
    Numeric(String),
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<ExactError> for CliError {
    fn from(err: ExactError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<MpError> for CliError {
    fn from(err: MpError) -> Self {
        match err {
            MpError::NumericFailure => CliError::Numeric(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(err: ExperimentError) -> Self {
        match err {
            ExperimentError::Mp(MpError::NumericFailure) => CliError::Numeric(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn cmd_fuse(args: FuseArgs) -> Result<String, CliError> {
    let scheme: Scheme = args.scheme.parse().map_err(ExperimentError::from)?;
    let reports = read_reports(&args.input, &args.shape)?;
    let pmal = single_pmal(&args.model)?;
    let params = build_params(reports.n(), reports.m(), &args.model, pmal)?;
    validate_mp_flags(&args.mp)?;
    if !(args.delta_iso > 0.0 && args.delta_iso <= 1.0) {
        return Err(CliError::Config(
            "delta-iso must lie in (0, 1]".to_string(),
        ));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let outcome = match scheme {
        Scheme::Mp => {
            let fused = fuse_mp(&reports, &params, args.mp.iters, args.mp.tol)?;
            FuseOutcome {
                decisions: fused.decisions.bits().to_vec(),
                state_posteriors: Some(fused.state_posteriors),
                honesty_posteriors: Some(fused.honesty_posteriors),
                iterations: Some(fused.iterations_used),
                converged: Some(fused.converged),
                log_evidence: None,
            }
        }
        Scheme::Optimal => exact_outcome(exact_bitwise_map(&reports, &params)?),
        Scheme::Majority => FuseOutcome::decisions_only(majority_fuse(&reports, &mut rng)),
        Scheme::Hard => FuseOutcome::decisions_only(
            hard_isolation_fuse(&reports, &params, args.delta_iso, &mut rng).0,
        ),
        Scheme::Soft => {
            FuseOutcome::decisions_only(soft_isolation_fuse(&reports, &params, &mut rng).0)
        }
    };
    Ok(render_outcome(&outcome, args.json))
}

fn cmd_oracle(args: OracleArgs) -> Result<String, CliError> {
    let reports = read_reports(&args.input, &args.shape)?;
    let pmal = single_pmal(&args.model)?;
    let params = build_params(reports.n(), reports.m(), &args.model, pmal)?;
    let result = if args.joint {
        exact_joint_enumeration(&reports, &params)?
    } else {
        exact_bitwise_map(&reports, &params)?
    };
    Ok(render_outcome(&exact_outcome(result), args.json))
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, CliError> {
    let schemes: Vec<Scheme> = args
        .schemes
        .iter()
        .map(|name| name.parse().map_err(|e: ExperimentError| e.into()))
        .collect::<Result<_, CliError>>()?;
    validate_mp_flags(&args.mp)?;

    let base = ModelParams {
        n: args.n,
        m: args.m,
        epsilon: args.model.epsilon,
        rho: args.model.rho,
        alpha: args.model.alpha,
        pmal_true: args.model.pmal[0],
        pmal_fc: args.model.pmal_fc.unwrap_or(args.model.pmal[0]),
    };
    let grid_points = build_grid(&base, &args.model, args.sweep.as_deref())?;

    let mut configs = Vec::new();
    for &scheme in &schemes {
        for params in &grid_points {
            let config = ExperimentConfig {
                params: params.clone(),
                scheme,
                trials: args.trials,
                mp_max_iters: args.mp.iters,
                mp_tol: args.mp.tol,
                delta_iso: args.delta_iso,
                master_seed: args.seed,
            };
            config.validate().map_err(CliError::from)?;
            configs.push(config);
        }
    }

    let rows = with_workers(args.workers, || {
        let mut rows = String::from(CSV_HEADER);
        rows.push('\n');
        for config in &configs {
            let estimate = estimate_error_probability(config)?;
            let p = &config.params;
            let mean_iters = estimate
                .mean_mp_iterations
                .map_or(String::new(), |mean| mean.to_string());
            writeln!(
                rows,
                "{},{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
                config.scheme,
                p.n,
                p.m,
                p.epsilon,
                p.rho,
                p.alpha,
                p.pmal_true,
                p.pmal_fc,
                config.trials,
                estimate.pe,
                estimate.ci_low,
                estimate.ci_high,
                mean_iters,
                config.master_seed,
            )
            .expect("writing to a string cannot fail");
        }
        Ok(rows)
    })?;
    deliver(rows, args.output.as_deref())
}

fn cmd_compare(args: CompareArgs) -> Result<String, CliError> {
    validate_mp_flags(&args.mp)?;
    let base = ModelParams {
        n: args.n,
        m: args.m,
        epsilon: args.model.epsilon,
        rho: args.model.rho,
        alpha: args.model.alpha,
        pmal_true: args.model.pmal[0],
        pmal_fc: args.model.pmal_fc.unwrap_or(args.model.pmal[0]),
    };
    let grid_points = build_grid(&base, &args.model, args.sweep.as_deref())?;

    let mut configs = Vec::new();
    for params in &grid_points {
        let config = ExperimentConfig {
            params: params.clone(),
            scheme: Scheme::Mp,
            trials: args.trials,
            mp_max_iters: args.mp.iters,
            mp_tol: args.mp.tol,
            delta_iso: 0.325,
            master_seed: args.seed,
        };
        config.validate().map_err(CliError::from)?;
        configs.push(config);
    }

    let rows = with_workers(args.workers, || {
        let mut rows = String::from(COMPARE_HEADER);
        rows.push('\n');
        for config in &configs {
            let estimate = estimate_paired(config)?;
            let p = &config.params;
            writeln!(
                rows,
                "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                p.n,
                p.m,
                p.epsilon,
                p.rho,
                p.alpha,
                p.pmal_true,
                p.pmal_fc,
                config.trials,
                estimate.pe_mp,
                estimate.pe_optimal,
                estimate.pe_gap,
                estimate.differing_fraction,
                estimate.mean_mp_iterations,
                config.master_seed,
            )
            .expect("writing to a string cannot fail");
        }
        Ok(rows)
    })?;
    deliver(rows, args.output.as_deref())
}

struct FuseOutcome {
    decisions: Vec<u8>,
    state_posteriors: Option<Vec<f64>>,
    honesty_posteriors: Option<Vec<f64>>,
    iterations: Option<usize>,
    converged: Option<bool>,
    log_evidence: Option<f64>,
}

impl FuseOutcome {
    fn decisions_only(decisions: crate::model::StateSequence) -> Self {
        FuseOutcome {
            decisions: decisions.bits().to_vec(),
            state_posteriors: None,
            honesty_posteriors: None,
            iterations: None,
            converged: None,
            log_evidence: None,
        }
    }
}

fn exact_outcome(result: ExactResult) -> FuseOutcome {
    FuseOutcome {
        decisions: result.decisions.bits().to_vec(),
        state_posteriors: Some(result.state_posteriors),
        honesty_posteriors: Some(result.node_posteriors),
        iterations: None,
        converged: None,
        log_evidence: Some(result.log_evidence),
    }
}

fn render_outcome(outcome: &FuseOutcome, json: bool) -> String {
    if json {
        let value = serde_json::json!({
            "decisions": outcome.decisions,
            "state_posteriors": outcome.state_posteriors,
            "honesty_posteriors": outcome.honesty_posteriors,
            "iterations": outcome.iterations,
            "converged": outcome.converged,
            "log_evidence": outcome.log_evidence,
        });
        let mut rendered = value.to_string();
        rendered.push('\n');
        return rendered;
    }

    let mut out = String::new();
    let decisions: Vec<String> = outcome.decisions.iter().map(u8::to_string).collect();
    writeln!(out, "decisions: {}", decisions.join(" ")).unwrap();
    if let Some(posteriors) = &outcome.state_posteriors {
        writeln!(out, "state_posteriors: {}", join_floats(posteriors)).unwrap();
    }
    if let Some(posteriors) = &outcome.honesty_posteriors {
        writeln!(out, "honesty_posteriors: {}", join_floats(posteriors)).unwrap();
    }
    if let Some(iterations) = outcome.iterations {
        writeln!(out, "iterations: {iterations}").unwrap();
    }
    if let Some(converged) = outcome.converged {
        writeln!(out, "converged: {converged}").unwrap();
    }
    if let Some(log_evidence) = outcome.log_evidence {
        writeln!(out, "log_evidence: {log_evidence}").unwrap();
    }
    out
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn read_reports(path: &std::path::Path, shape: &ShapeFlags) -> Result<ReportMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Config(format!("{}: {err}", path.display())))?;
    let reports = ReportMatrix::parse(&text)?;
    if let Some(m) = shape.m {
        if m != reports.m() {
            return Err(CliError::Config(format!(
                "--m {m} does not match the {} lines in the input file",
                reports.m()
            )));
        }
    }
    if let Some(n) = shape.n {
        if n != reports.n() {
            return Err(CliError::Config(format!(
                "--n {n} does not match the {} columns in the input file",
                reports.n()
            )));
        }
    }
    Ok(reports)
}

fn single_pmal(model: &ModelFlags) -> Result<f64, CliError> {
    match model.pmal[..] {
        [value] => Ok(value),
        _ => Err(CliError::Config(
            "this command takes exactly one --pmal value".to_string(),
        )),
    }
}

fn build_params(
    n: usize,
    m: usize,
    model: &ModelFlags,
    pmal: f64,
) -> Result<ModelParams, CliError> {
    let params = ModelParams {
        n,
        m,
        epsilon: model.epsilon,
        rho: model.rho,
        alpha: model.alpha,
        pmal_true: pmal,
        pmal_fc: model.pmal_fc.unwrap_or(pmal),
    };
    params.validate()?;
    Ok(params)
}

fn validate_mp_flags(mp: &MpFlags) -> Result<(), CliError> {
    if mp.iters < 1 {
        return Err(CliError::Config("iters must be at least 1".to_string()));
    }
    if !(mp.tol > 0.0 && mp.tol.is_finite()) {
        return Err(CliError::Config(
            "tol must be positive and finite".to_string(),
        ));
    }
    Ok(())
}

/// Variables a sweep can range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepVar {
    N,
    M,
    Epsilon,
    Rho,
    Alpha,
    Pmal,
}

impl SweepVar {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "n" => Ok(SweepVar::N),
            "m" => Ok(SweepVar::M),
            "epsilon" => Ok(SweepVar::Epsilon),
            "rho" => Ok(SweepVar::Rho),
            "alpha" => Ok(SweepVar::Alpha),
            "pmal" => Ok(SweepVar::Pmal),
            other => Err(CliError::Config(format!(
                "unknown sweep variable {other:?}, expected one of n, m, epsilon, rho, alpha, pmal"
            ))),
        }
    }
}

/// Expands the base parameters into the full grid.
///
/// The grid is the cartesian product of the `--pmal` list and the sweep
/// values, sweep innermost. Sweeping `pmal` replaces the `--pmal` list.
/// `pmal_fc` follows the generating value pointwise unless `--pmal-fc` pins
/// it.
fn build_grid(
    base: &ModelParams,
    model: &ModelFlags,
    sweep: Option<&str>,
) -> Result<Vec<ModelParams>, CliError> {
    let parsed = sweep.map(parse_sweep).transpose()?;

    let pmal_values: Vec<f64> = match &parsed {
        Some((SweepVar::Pmal, values)) => values.clone(),
        _ => model.pmal.clone(),
    };

    let mut grid = Vec::new();
    for &pmal in &pmal_values {
        let mut point = base.clone();
        point.pmal_true = pmal;
        point.pmal_fc = model.pmal_fc.unwrap_or(pmal);
        match &parsed {
            None | Some((SweepVar::Pmal, _)) => grid.push(point),
            Some((var, values)) => {
                for &value in values {
                    let mut swept = point.clone();
                    apply_sweep_value(&mut swept, *var, value)?;
                    grid.push(swept);
                }
            }
        }
    }
    for params in &grid {
        params.validate()?;
    }
    Ok(grid)
}

fn apply_sweep_value(
    params: &mut ModelParams,
    var: SweepVar,
    value: f64,
) -> Result<(), CliError> {
    match var {
        SweepVar::N => params.n = integral(value, "n")?,
        SweepVar::M => params.m = integral(value, "m")?,
        SweepVar::Epsilon => params.epsilon = value,
        SweepVar::Rho => params.rho = value,
        SweepVar::Alpha => params.alpha = value,
        SweepVar::Pmal => unreachable!("pmal sweeps replace the pmal list"),
    }
    Ok(())
}

fn integral(value: f64, what: &str) -> Result<usize, CliError> {
    let rounded = value.round();
    if (value - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(CliError::Config(format!(
            "sweep over {what} needs positive integer values, got {value}"
        )));
    }
    Ok(rounded as usize)
}

/// Parses `VAR=START:STEP:STOP` into the swept variable and its values.
///
/// Values are `start + k * step` up to and including `stop` (within one
/// part in 10^9), each snapped to the nearest multiple of 1e-9 to undo
/// accumulated binary round-off in decimal grids.
fn parse_sweep(text: &str) -> Result<(SweepVar, Vec<f64>), CliError> {
    let bad = |reason: &str| {
        CliError::Config(format!(
            "invalid sweep {text:?}: {reason}; expected VAR=START:STEP:STOP"
        ))
    };
    let (name, range) = text.split_once('=').ok_or_else(|| bad("missing '='"))?;
    let var = SweepVar::parse(name.trim())?;
    let parts: Vec<&str> = range.split(':').collect();
    let [start, step, stop] = parts[..] else {
        return Err(bad("range needs exactly START:STEP:STOP"));
    };
    let parse = |text: &str, what: &str| {
        text.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("{what} {text:?} is not a number")))
    };
    let start = parse(start, "start")?;
    let step = parse(step, "step")?;
    let stop = parse(stop, "stop")?;
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    if stop < start {
        return Err(bad("stop must not be below start"));
    }

    let slack = 1e-9 * stop.abs().max(1.0);
    let count = ((stop - start) / step + slack).floor() as usize + 1;
    if count > 100_000 {
        return Err(bad("more than 100000 grid points"));
    }
    let values = (0..count)
        .map(|k| snap(start + k as f64 * step))
        .collect();
    Ok((var, values))
}

/// Rounds to the nearest multiple of 1e-9 when the value sits within a few
/// ulps of it, so decimal grids print as written while anything else stays
/// untouched.
fn snap(value: f64) -> f64 {
    let snapped = (value * 1e9).round() / 1e9;
    if (value - snapped).abs() <= 1e-12 * value.abs().max(1.0) {
        snapped
    } else {
        value
    }
}

/// Runs `work` on a rayon pool sized by `--workers`, the environment
/// variable, or the default in that order.
fn with_workers<F>(flag: Option<usize>, work: F) -> Result<String, CliError>
where
    F: FnOnce() -> Result<String, ExperimentError> + Send,
{
    let workers = match flag {
        Some(count) => Some(count),
        None => match std::env::var(WORKERS_ENV) {
            Ok(text) => Some(text.parse::<usize>().map_err(|_| {
                CliError::Config(format!(
                    "{WORKERS_ENV}={text:?} is not a worker count"
                ))
            })?),
            Err(_) => None,
        },
    };
    match workers {
        None => work().map_err(CliError::from),
        Some(0) => Err(CliError::Config(
            "workers must be at least 1".to_string(),
        )),
        Some(count) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build()
                .map_err(|err| CliError::Config(format!("worker pool: {err}")))?;
            pool.install(work).map_err(CliError::from)
        }
    }
}

fn deliver(rows: String, output: Option<&std::path::Path>) -> Result<String, CliError> {
    match output {
        None => Ok(rows),
        Some(path) => {
            fs::write(path, rows)
                .map_err(|err| CliError::Config(format!("{}: {err}", path.display())))?;
            Ok(String::new())
        }
    }
}
