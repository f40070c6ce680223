//! The `sgdc` command line.
//!
//! Exit codes: `0` success, `1` bad input or configuration, `2` numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::bench::{
    run_group_recovery, run_signal_recovery, trial_rng, write_summary_csv, ExperimentOutcome,
    ExperimentSpec, NoiseKind, StartPoint,
};
use crate::diagnostics::{certify, DEFAULT_CERTIFY_TOL};
use crate::error::{Error, Result};
use crate::io::{load_problem, open_output, read_vector, sibling, write_json};
use crate::model::{ProblemSpec, RelaxationParams, DEFAULT_SAFETY};
use crate::solver::{solve, Algorithm, SolverConfig};

pub const SEED_ENV: &str = "SGDC_SEED";

#[derive(Debug, Parser)]
#[command(name = "sgdc", version, about = "Sparse group l0 solvers, benchmarks and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file; writes the report as JSON and the iteration trace as CSV.
    Solve(SolveArgs),
    /// Sparse signal recovery benchmark.
    BenchSignal(BenchArgs),
    /// Group-sparse recovery benchmark.
    BenchGroup(BenchArgs),
    /// Check a candidate vector for stationarity and the lower-bound property.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Args)]
struct SolverFlags {
    #[arg(long, default_value = "line-search")]
    algorithm: Algorithm,
    /// Solver settings as JSON; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schedule start M in mu_k = max(M - k/d, nu).
    #[arg(long = "M")]
    m_start: Option<f64>,
    /// Schedule divisor d.
    #[arg(long)]
    step_divisor: Option<f64>,
    /// Nonmonotone window.
    #[arg(long = "N")]
    window: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// A number (constant start), `random` (uniform on [-1, 2]) or a vector file.
    #[arg(long)]
    x0: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace CSV path; defaults to `<out stem>.trace.csv` next to the report.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Single,
    Dims,
    #[value(name = "M")]
    M,
    X0,
    Noise,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "single")]
    sweep: Sweep,
    #[arg(long)]
    n: Option<usize>,
    /// Dimensions for `--sweep dims`.
    #[arg(long, value_delimiter = ',', default_value = "160,1600")]
    dims: Vec<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Planted nonzeros (signal) or active groups (group).
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    noise: Option<NoiseKind>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Summary CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial JSON detail.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Candidate: JSON array, solve report, or whitespace-separated numbers.
    #[arg(long)]
    x: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CERTIFY_TOL)]
    tol: f64,
    /// Certificate JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sgdc: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::BenchSignal(a) => cmd_bench(a, false),
        Command::BenchGroup(a) => cmd_bench(a, true),
        Command::Certify(a) => cmd_certify(a),
    }
}

fn seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn solver_config(f: &SolverFlags) -> Result<SolverConfig> {
    let mut cfg = match &f.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
            })?
        }
        None => SolverConfig::default(),
    };
    if let Some(v) = f.window {
        cfg.window = v;
    }
    if let Some(v) = f.rho {
        cfg.rho = v;
    }
    if let Some(v) = f.beta {
        cfg.beta = v;
    }
    if let Some(v) = f.tol {
        cfg.tol = v;
    }
    if let Some(v) = f.max_outer {
        cfg.max_outer = v;
    }
    Ok(cfg)
}

enum X0 {
    Constant(f64),
    Random,
    File(PathBuf),
}

fn parse_x0(s: &str) -> X0 {
    if s.eq_ignore_ascii_case("random") {
        X0::Random
    } else if let Ok(v) = s.parse::<f64>() {
        X0::Constant(v)
    } else {
        X0::File(PathBuf::from(s))
    }
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let spec = load_problem(&a.problem)?;
    let n = spec.n();
    let f = &a.solver;
    let mut cfg = solver_config(f)?;
    match f.x0.as_deref().map(parse_x0) {
        None => {}
        Some(X0::Constant(v)) => cfg.x0 = Some(vec![v; n]),
        Some(X0::Random) => {
            let mut rng = trial_rng(seed(f.seed)?, 0);
            cfg.x0 = Some((0..n).map(|_| rng.random_range(-1.0..=2.0)).collect());
        }
        Some(X0::File(p)) => cfg.x0 = Some(read_vector(&p)?),
    }
    let rp = relaxation(&spec, f.m_start, f.step_divisor)?;
    let report = solve(&spec, &rp, &cfg, f.algorithm)?;
    write_json(&report, a.out.as_deref())?;
    let trace = a.trace.clone().or_else(|| a.out.as_deref().map(|p| sibling(p, "trace.csv")));
    if let Some(path) = trace {
        report.write_trace_csv(open_output(Some(&path))?)?;
    }
    eprintln!(
        "{}: {} iterations ({:?}), F0 = {}, support {}",
        report.algorithm,
        report.iterations,
        report.stop_reason,
        report.final_record().map_or(f64::NAN, |r| r.f_primal),
        report.x_final.iter().filter(|v| **v != 0.0).count()
    );
    Ok(())
}

fn relaxation(spec: &ProblemSpec, m: Option<f64>, d: Option<f64>) -> Result<RelaxationParams> {
    let rp = RelaxationParams::derive(spec, DEFAULT_SAFETY)?;
    if m.is_none() && d.is_none() {
        return Ok(rp);
    }
    let start = m.unwrap_or(rp.schedule.start);
    let divisor = d.unwrap_or(rp.schedule.step_divisor);
    rp.with_schedule(start, divisor)
}

fn base_experiment(a: &BenchArgs, group: bool, n: usize) -> Result<ExperimentSpec> {
    let mut es = if group { ExperimentSpec::group(n) } else { ExperimentSpec::signal(n) };
    let f = &a.solver;
    if let Some(v) = a.m {
        es.m = v;
    }
    if let Some(v) = a.s {
        es.s = v;
    }
    if let Some(v) = a.trials {
        es.trials = v;
    }
    if let Some(v) = a.noise {
        es.noise = v;
    }
    if let Some(v) = a.sigma {
        es.sigma = v;
        if v > 0.0 && es.noise == NoiseKind::None && a.noise.is_none() {
            es.noise = NoiseKind::Gaussian;
        }
    }
    if let Some(v) = f.m_start {
        es.schedule_start = v;
    }
    if let Some(v) = f.step_divisor {
        es.step_divisor = v;
    }
    match f.x0.as_deref().map(parse_x0) {
        None => {}
        Some(X0::Constant(v)) => es.x0 = StartPoint::Constant(v),
        Some(X0::Random) => es.x0 = StartPoint::Uniform { lo: -1.0, hi: 2.0 },
        Some(X0::File(p)) => {
            return Err(Error::Config(format!(
                "benchmarks take a numeric or `random` x0, got {}",
                p.display()
            )))
        }
    }
    es.seed = seed(f.seed)?;
    es.algorithm = f.algorithm;
    es.solver = solver_config(f)?;
    es.validate()?;
    Ok(es)
}

fn bench_rows(a: &BenchArgs, group: bool) -> Result<Vec<(String, ExperimentSpec)>> {
    let default_n = if group { 150 } else { 160 };
    let n = a.n.unwrap_or(default_n);
    let base = base_experiment(a, group, n)?;
    let rows = match a.sweep {
        Sweep::Single => vec![(format!("n={n}"), base)],
        Sweep::Dims => a
            .dims
            .iter()
            .map(|&d| Ok((format!("n={d}"), base_experiment(a, group, d)?)))
            .collect::<Result<_>>()?,
        Sweep::M => [0.0, 4.0, 5.0, 20.0, 50.0]
            .into_iter()
            .map(|m| {
                let mut es = base.clone();
                es.schedule_start = m;
                (format!("M={m}"), es)
            })
            .collect(),
        Sweep::X0 => [
            StartPoint::Constant(0.0),
            StartPoint::Constant(1.0),
            StartPoint::Constant(2.0),
            StartPoint::Uniform { lo: -1.0, hi: 2.0 },
            StartPoint::Constant(-1.0),
        ]
        .into_iter()
        .map(|x0| {
            let mut es = base.clone();
            es.x0 = x0;
            (format!("x0={x0}"), es)
        })
        .collect(),
        Sweep::Noise => NoiseKind::ALL
            .into_iter()
            .filter(|k| *k != NoiseKind::None)
            .map(|k| {
                let mut es = base.clone();
                es.noise = k;
                (format!("noise={k}"), es)
            })
            .collect(),
    };
    Ok(rows)
}

fn cmd_bench(a: BenchArgs, group: bool) -> Result<()> {
    let mut outcomes: Vec<ExperimentOutcome> = Vec::new();
    for (label, es) in bench_rows(&a, group)? {
        let o = if group {
            run_group_recovery(&es, label, a.jobs)?
        } else {
            run_signal_recovery(&es, label, a.jobs)?
        };
        let s = &o.summary;
        eprintln!(
            "{:>16}  k {:8.1}  t {:.3}s  MSE {:.3e}  support {:.1}  exact {}/{}",
            s.label, s.mean_iterations, s.mean_time, s.mean_mse, s.mean_support, s.support_exact, s.trials
        );
        outcomes.push(o);
    }
    let summaries: Vec<_> = outcomes.iter().map(|o| o.summary.clone()).collect();
    write_summary_csv(&summaries, open_output(a.out.as_deref())?)?;
    if let Some(path) = &a.json {
        write_json(&outcomes, Some(path))?;
    }
    Ok(())
}

fn cmd_certify(a: CertifyArgs) -> Result<()> {
    let spec = load_problem(&a.problem)?;
    let x = read_vector(&a.x)?;
    if x.len() != spec.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} entries, problem has n = {}",
            a.x.display(),
            x.len(),
            spec.n()
        )));
    }
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY)?;
    let c = certify(&spec, &rp, &x, a.tol)?;
    println!("is_sw_d_stationary: {}", c.is_sw_d_stationary);
    println!("lower_bound_ok: {}", c.lower_bound_ok);
    println!("violations: {:?}", c.violations);
    println!("stationarity_residual: {:e}", c.stationarity_residual);
    println!("support_size: {}", c.support.len());
    println!("f_primal: {}", c.f_primal);
    println!("f_relaxed: {}", c.f_relaxed);
    println!("nu: {}", c.nu);
    if let Some(path) = &a.out {
        write_json(&c, Some(path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "sgdc", "bench-signal", "--n", "320", "--M", "20", "--N", "0", "--sweep", "x0", "--noise", "gamma",
            "--algorithm", "extrapolation", "--beta", "0.5",
        ])
        .unwrap();
        let Command::BenchSignal(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.n, Some(320));
        assert_eq!(a.sweep, Sweep::X0);
        assert_eq!(a.noise, Some(NoiseKind::Gamma));
        assert_eq!(a.solver.m_start, Some(20.0));
        assert_eq!(a.solver.window, Some(0));
        assert_eq!(a.solver.algorithm, Algorithm::Extrapolation);
        let rows = bench_rows(&a, false).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|(_, es)| es.schedule_start == 20.0 && es.solver.beta == 0.5));
    }

    #[test]
    fn default_settings() {
        let cli = Cli::try_parse_from(["sgdc", "bench-signal"]).unwrap();
        let Command::BenchSignal(a) = cli.command else { panic!("wrong subcommand") };
        let es = base_experiment(&a, false, 160).unwrap();
        let mut want = ExperimentSpec::signal(160);
        want.seed = es.seed;
        assert_eq!(es, want);
    }

    #[test]
    fn bad_values_exit_one() {
        assert_eq!(run(["sgdc", "solve"]), 1);
        assert_eq!(run(["sgdc", "bench-signal", "--noise", "pink"]), 1);
        assert_eq!(run(["sgdc", "bench-signal", "--trials", "0"]), 1);
        assert_eq!(run(["sgdc", "--help"]), 0);
    }

    #[test]
    fn x0_forms() {
        assert!(matches!(parse_x0("1.97"), X0::Constant(v) if v == 1.97));
        assert!(matches!(parse_x0("-1"), X0::Constant(v) if v == -1.0));
        assert!(matches!(parse_x0("Random"), X0::Random));
        assert!(matches!(parse_x0("x0.json"), X0::File(_)));
    }
}
