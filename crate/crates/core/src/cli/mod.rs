//! The `trigopt` experiment runner.
//!
//! Subcommands: `run`, `sweep`, `compare`, `validate` and `estimate-bounds`.
//! Exit codes: 0 success, 1 a validation check failed, 2 configuration
//! error, 3 solver error. `TRIGOPT_WORKERS` sets the worker pool size.

pub mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{estimate_bounds, problem_by_id, DomainBox, ProblemSpec};
use crate::solver::{run_periodic, run_self_triggered, SolverConfig, Trajectory};
use crate::trigger::Strategy;
use crate::validation::{
    check_appendix_bounds, check_lyapunov_profile, check_oracle_consistency, check_trigger_soundness,
    ValidationReport,
};
use output::{trajectory_csv, write_atomic, RunSummary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

/// Points of the uniform grid used for tracking-error maxima.
pub const TRACKING_GRID: usize = 10_001;

#[derive(Debug, Parser)]
#[command(name = "trigopt", version, about = "Self-triggered Newton tracking experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the self-triggered optimizer once.
    Run {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, default_value = "trajectory.csv")]
        trajectory: PathBuf,
        #[arg(long, default_value = "summary.toml")]
        summary: PathBuf,
    },
    /// Repeat the run over a list of α or ε values.
    Sweep {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "sweep.toml")]
        output: PathBuf,
        /// Also write one trajectory file per value into this directory.
        #[arg(long)]
        trajectory_dir: Option<PathBuf>,
    },
    /// Compare the self-triggered run with periodic Euler sampling.
    Compare {
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated sampling periods.
        #[arg(long = "h", value_delimiter = ',', required = true)]
        periods: Vec<f64>,
        #[arg(long, default_value = "compare.csv")]
        output: PathBuf,
    },
    /// Run the optimizer and check its guarantees on a dense grid.
    Validate {
        #[command(flatten)]
        solve: SolveArgs,
        /// Grid points per segment.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Multiply every derivative bound except `m` by this factor.
        #[arg(long)]
        corrupt_bounds: Option<f64>,
        /// Random points for the oracle audit.
        #[arg(long, default_value_t = 100)]
        audit_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write all reports as one structured document.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate derivative bounds of a problem on a grid.
    EstimateBounds {
        problem: String,
        /// Grid points per axis (state coordinates and time).
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Box half-width for problems without a finite box.
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        tf: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Alpha,
    Epsilon,
}

/// Problem id plus solver settings; flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// `paper1d` or `quad:<n>,<omega>`.
    pub problem: String,
    /// TOML file with any of the solver settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    #[arg(long)]
    pub root_tol: Option<f64>,
}

/// Config-file schema; field names follow [`SolverConfig`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub strategy: Option<Strategy>,
    pub root_tol: Option<f64>,
    pub max_samples: Option<usize>,
}

pub const DEFAULT_ALPHA: f64 = 5.0;
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_STRATEGY: Strategy = Strategy::ThirdOrder;

enum Failure {
    Validation,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::UnknownProblem(_) | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::from(run_with_args(std::env::args_os()))
}

/// Parses `args` (program name first) and runs the command in-process,
/// returning the exit code. The worker pool is left as configured.
pub fn run_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation) => EXIT_VALIDATION,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("TRIGOPT_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("TRIGOPT_WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Run { solve, trajectory, summary } => {
            let (problem, cfg) = resolve(&solve)?;
            let (traj, sum) = run_once(&problem, &cfg, None)?;
            write_atomic(&trajectory, &trajectory_csv(&traj))?;
            write_atomic(&summary, sum.to_toml().as_bytes())?;
            eprintln!(
                "{}: {} samples, wrote {} and {}",
                sum.problem,
                sum.samples,
                trajectory.display(),
                summary.display()
            );
        }
        Command::Sweep { solve, param, values, output, trajectory_dir } => {
            let (problem, base) = resolve(&solve)?;
            let rows = sweep(&problem, &base, param, &values, trajectory_dir.as_deref())?;
            let doc = SweepDocument { parameter: param_name(param).into(), runs: rows };
            let text = toml::to_string(&doc).expect("sweep rows serialize");
            write_atomic(&output, text.as_bytes())?;
            print!("{text}");
        }
        Command::Compare { solve, periods, output } => {
            let (problem, cfg) = resolve(&solve)?;
            let rows = compare(&problem, &cfg, &periods)?;
            let text = compare_csv(&rows);
            write_atomic(&output, &text)?;
            print!("{}", String::from_utf8_lossy(&text));
        }
        Command::Validate { solve, grid, corrupt_bounds, audit_samples, seed, report } => {
            let (mut problem, cfg) = resolve(&solve)?;
            if let Some(f) = corrupt_bounds {
                if !(f.is_finite() && f > 0.0) {
                    return Err(Error::InvalidConfig(format!("--corrupt-bounds must be positive, got {f}")).into());
                }
                problem.bounds = problem.bounds.scaled(f);
            }
            let reports = validate(&problem, &cfg, grid, audit_samples, seed)?;
            for r in &reports {
                println!("{r}");
            }
            if let Some(path) = report {
                let doc = ReportDocument { reports: reports.clone() };
                write_atomic(&path, toml::to_string(&doc).expect("reports serialize").as_bytes())?;
            }
            if !reports.iter().all(|r| r.pass) {
                return Err(Failure::Validation);
            }
        }
        Command::EstimateBounds { problem, grid, half_width, t0, tf, output } => {
            let problem = problem_by_id(&problem)?;
            let domain = match half_width {
                Some(r) => DomainBox::cube(problem.dim(), r)?,
                None if problem.domain_box.is_finite() => problem.domain_box.clone(),
                None => return Err(Error::InvalidConfig("problem has no finite box; pass --half-width".into()).into()),
            };
            let (d0, d1) = problem.default_horizon;
            let bounds = estimate_bounds(problem.oracle.as_ref(), &domain, (t0.unwrap_or(d0), tf.unwrap_or(d1)), grid)?;
            let text = toml::to_string(&bounds).expect("bounds serialize");
            match output {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

/// Looks up the problem and merges defaults, config file and flags.
pub fn resolve(args: &SolveArgs) -> Result<(ProblemSpec, SolverConfig)> {
    let problem = problem_by_id(&args.problem)?;
    let file = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
            toml::from_str::<ConfigFile>(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    let mut cfg = problem.config(
        args.strategy.or(file.strategy).unwrap_or(DEFAULT_STRATEGY),
        args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
        args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
    );
    if let Some(t0) = args.t0.or(file.t0) {
        cfg.t0 = t0;
    }
    if let Some(tf) = args.tf.or(file.tf) {
        cfg.tf = tf;
    }
    if let Some(x0) = args.x0.clone().or(file.x0) {
        cfg.x0 = x0;
    }
    if let Some(n) = args.max_samples.or(file.max_samples) {
        cfg.max_samples = n;
    }
    if let Some(tol) = args.root_tol.or(file.root_tol) {
        cfg.root_tol = tol;
    }
    if cfg.x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: cfg.x0.len() });
    }
    cfg.validate()?;
    Ok((problem, cfg))
}

/// `n` evenly spaced points on `[a, b]`, both ends included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    let last = n - 1;
    (0..n).map(|i| if i == last { b } else { a + (b - a) * i as f64 / last as f64 }).collect()
}

/// `max ‖x(t) − x*(t)‖₂` over `times`, with `x*` warm-started along the grid.
pub fn max_tracking_error(problem: &ProblemSpec, traj: &Trajectory, times: &[f64]) -> Result<f64> {
    let Some(&first) = times.first() else {
        return Ok(f64::NEG_INFINITY);
    };
    let seed = traj.interpolate(first)?;
    let optima = problem.optimum_path(times, &seed)?;
    times.iter().zip(&optima).try_fold(f64::NEG_INFINITY, |acc, (&t, xs)| {
        Ok(acc.max((traj.interpolate(t)? - xs).norm()))
    })
}

/// Runs the self-triggered optimizer and summarizes it. When `hold_grid` is
/// set, also reports the hold-phase maximum tracking error on that many
/// points.
pub fn run_once(
    problem: &ProblemSpec,
    cfg: &SolverConfig,
    hold_grid: Option<usize>,
) -> Result<(Trajectory, RunSummary)> {
    let start = Instant::now();
    let traj = run_self_triggered(problem.oracle.as_ref(), &problem.bounds, cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let stats = traj.step_stats();
    let final_err = (&traj.end.x - problem.optimum_at(traj.end.t, &traj.end.x)?).norm();
    let hold_max = match (hold_grid, traj.phase_switch_time()) {
        (Some(n), Some(ts)) => Some(max_tracking_error(problem, &traj, &uniform_grid(ts, traj.tf(), n))?),
        _ => None,
    };
    let summary = RunSummary {
        problem: problem.name.clone(),
        strategy: cfg.strategy,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        t0: cfg.t0,
        tf: cfg.tf,
        samples: stats.count,
        records: traj.len(),
        mean_step: stats.mean,
        std_step: stats.std,
        min_step: stats.min,
        max_step: stats.max,
        final_tracking_error: final_err,
        phase_switch_index: traj.phase_switch_index(),
        phase_switch_time: traj.phase_switch_time(),
        hold_max_tracking_error: hold_max,
        wall_time_s: wall,
    };
    Ok((traj, summary))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepDocument {
    pub parameter: String,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Serialize)]
struct ReportDocument {
    reports: Vec<ValidationReport>,
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::Alpha => "alpha",
        SweepParam::Epsilon => "epsilon",
    }
}

/// One run per value, concurrently; rows come back in input order.
pub fn sweep(
    problem: &ProblemSpec,
    base: &SolverConfig,
    param: SweepParam,
    values: &[f64],
    trajectory_dir: Option<&Path>,
) -> Result<Vec<RunSummary>> {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidConfig(format!("sweep values must be positive, got {v}")));
    }
    let configs: Vec<SolverConfig> = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match param {
                SweepParam::Alpha => cfg.alpha = v,
                SweepParam::Epsilon => cfg.epsilon = v,
            }
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<_>>()?;
    let hold_grid = (param == SweepParam::Epsilon).then_some(TRACKING_GRID);
    configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let (traj, summary) = run_once(problem, cfg, hold_grid)?;
            if let Some(dir) = trajectory_dir {
                let path = dir.join(format!("{}_{i:03}.csv", param_name(param)));
                write_atomic(&path, &trajectory_csv(&traj))?;
            }
            Ok(summary)
        })
        .collect()
}

/// One row of the periodic-versus-self-triggered table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub h: Option<f64>,
    pub samples: usize,
    pub max_tracking_error: f64,
}

impl CompareRow {
    pub fn ln_samples(&self) -> f64 {
        (self.samples as f64).ln()
    }
}

/// The self-triggered run followed by one periodic run per period. Errors
/// are maximized on a shared uniform grid from the self-triggered phase
/// switch (or `t0` if it never switches) to `tf`; sample counts are
/// trajectory rows.
pub fn compare(problem: &ProblemSpec, cfg: &SolverConfig, periods: &[f64]) -> Result<Vec<CompareRow>> {
    if let Some(h) = periods.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(Error::InvalidConfig(format!("sampling periods must be positive, got {h}")));
    }
    let st = run_self_triggered(problem.oracle.as_ref(), &problem.bounds, cfg)?;
    let start = st.phase_switch_time().unwrap_or(cfg.t0);
    let grid = uniform_grid(start, cfg.tf, TRACKING_GRID);
    let mut rows = vec![CompareRow {
        method: "self_triggered".into(),
        h: None,
        samples: st.len(),
        max_tracking_error: max_tracking_error(problem, &st, &grid)?,
    }];
    let periodic: Vec<CompareRow> = periods
        .par_iter()
        .map(|&h| {
            let traj = run_periodic(problem.oracle.as_ref(), cfg, h)?;
            Ok(CompareRow {
                method: "periodic".into(),
                h: Some(h),
                samples: traj.len(),
                max_tracking_error: max_tracking_error(problem, &traj, &grid)?,
            })
        })
        .collect::<Result<_>>()?;
    rows.extend(periodic);
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "h", "samples", "ln_samples", "max_tracking_error"]).expect("in-memory write");
    for r in rows {
        let h = r.h.map(|h| h.to_string()).unwrap_or_default();
        w.write_record([
            r.method.clone(),
            h,
            r.samples.to_string(),
            r.ln_samples().to_string(),
            r.max_tracking_error.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Runs the optimizer and all four checks.
pub fn validate(
    problem: &ProblemSpec,
    cfg: &SolverConfig,
    grid: usize,
    audit_samples: usize,
    seed: u64,
) -> Result<Vec<ValidationReport>> {
    let oracle = problem.oracle.as_ref();
    let traj = run_self_triggered(oracle, &problem.bounds, cfg)?;
    let audit_box = if problem.domain_box.is_finite() { problem.domain_box.clone() } else { hull(&traj, 1.0)? };
    Ok(vec![
        check_trigger_soundness(&traj, oracle, &problem.bounds, grid),
        check_appendix_bounds(&traj, oracle, &problem.bounds, grid),
        check_lyapunov_profile(&traj, oracle, grid),
        check_oracle_consistency(oracle, &audit_box, (cfg.t0, cfg.tf), audit_samples, seed)?,
    ])
}

/// Bounding box of the samples, padded by `pad`.
fn hull(traj: &Trajectory, pad: f64) -> Result<DomainBox> {
    let n = traj.dim;
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for x in traj.records.iter().map(|r| &r.x).chain(std::iter::once(&traj.end.x)) {
        lo = lo.inf(x);
        hi = hi.sup(x);
    }
    DomainBox::new(lo.add_scalar(-pad).as_slice().to_vec(), hi.add_scalar(pad).as_slice().to_vec())
}
