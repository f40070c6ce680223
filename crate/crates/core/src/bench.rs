//! Synthetic recovery experiments: sparse nonnegative signals under
//! `min_{x∈[0,10]^n} ‖Ax − b‖² + ‖x‖₀`, and group-sparse signals under
//! `min_{x∈[−10,10]^n} ‖Ax − b‖² + λ1‖x‖₀ + λ2 Σ_l 𝟙[‖x_(l)‖₁ ≠ 0]`
//! with consecutive groups of three.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{certify, DEFAULT_CERTIFY_TOL};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix, LinearOperator, Matrix};
use crate::losses::LossModel;
use crate::model::{BoxConstraint, GroupNorm, GroupStructure, ProblemSpec, RelaxationParams, DEFAULT_SAFETY};
use crate::solver::{solve, Algorithm, SolveReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Rayleigh,
    Gamma,
    Exponential,
    Uniform,
    None,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 6] = [
        NoiseKind::Gaussian,
        NoiseKind::Rayleigh,
        NoiseKind::Gamma,
        NoiseKind::Exponential,
        NoiseKind::Uniform,
        NoiseKind::None,
    ];

    /// One unscaled draw: N(0,1), Rayleigh(1), Gamma(2,1), Exp(1) or U[−1,1].
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => StandardNormal.sample(rng),
            NoiseKind::Rayleigh => {
                let u: f64 = rng.random();
                (-2.0 * (1.0 - u).ln()).sqrt()
            }
            NoiseKind::Gamma => Gamma::new(2.0, 1.0).expect("valid shape").sample(rng),
            NoiseKind::Exponential => Exp::new(1.0).expect("valid rate").sample(rng),
            NoiseKind::Uniform => rng.random_range(-1.0..=1.0),
            NoiseKind::None => 0.0,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Rayleigh => "rayleigh",
            NoiseKind::Gamma => "gamma",
            NoiseKind::Exponential => "exponential",
            NoiseKind::Uniform => "uniform",
            NoiseKind::None => "none",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown noise kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    L0Signal,
    GroupL0,
}

/// Post-processing of the i.i.d. standard normal sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// `A Aᵀ = I`.
    OrthonormalRows,
    /// Every column has unit Euclidean norm.
    UnitColumns,
}

/// Starting point of every trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    Constant(f64),
    /// I.i.d. uniform on `[lo, hi]`, drawn from the trial stream after the data.
    Uniform { lo: f64, hi: f64 },
}

impl fmt::Display for StartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartPoint::Constant(v) => write!(f, "{v}"),
            StartPoint::Uniform { lo, hi } => write!(f, "U[{lo},{hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub n: usize,
    pub m: usize,
    /// Nonzeros for the signal model, active groups for the group model.
    pub s: usize,
    pub matrix: MatrixKind,
    /// Planted nonzeros have magnitudes uniform on this interval.
    pub magnitude: (f64, f64),
    pub noise: NoiseKind,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Schedule start `M` in `μ̄_k = M − k/d`.
    pub schedule_start: f64,
    pub step_divisor: f64,
    pub x0: StartPoint,
    pub lambda1: f64,
    pub lambda2: f64,
    pub solver: SolverConfig,
}

impl ExperimentSpec {
    /// Signal recovery at `n : m : s = 10 : 5 : 1`, Gaussian noise `σ = 10⁻²`,
    /// `x0 = 1.97·1`, `μ̄_k = 5 − k/5`, planted values uniform on `[2, 10]`.
    pub fn signal(n: usize) -> Self {
        Self {
            model: ModelKind::L0Signal,
            n,
            m: n / 2,
            s: n / 10,
            matrix: MatrixKind::OrthonormalRows,
            magnitude: (2.0, 10.0),
            noise: NoiseKind::Gaussian,
            sigma: 1e-2,
            trials: 10,
            seed: 0,
            algorithm: Algorithm::LineSearch,
            schedule_start: 5.0,
            step_divisor: 5.0,
            x0: StartPoint::Constant(1.97),
            lambda1: 1.0,
            lambda2: 0.0,
            solver: SolverConfig::default(),
        }
    }

    /// Group recovery with `n/3` groups of three, `λ1 = λ2 = 0.1`, box
    /// `[−10, 10]^n`, `μ̄_k = 1 − k/200`, `x0 = 0`.
    pub fn group(n: usize) -> Self {
        Self {
            model: ModelKind::GroupL0,
            n,
            m: n / 2,
            s: (n / 3 / 10).max(1),
            matrix: MatrixKind::OrthonormalRows,
            magnitude: (1.0, 10.0),
            noise: NoiseKind::None,
            sigma: 0.0,
            trials: 10,
            seed: 0,
            algorithm: Algorithm::LineSearch,
            schedule_start: 1.0,
            step_divisor: 200.0,
            x0: StartPoint::Constant(0.0),
            lambda1: 0.1,
            lambda2: 0.1,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("n and m must be positive".into()));
        }
        if self.m > self.n {
            return Err(Error::Config(format!("need m <= n, got m = {} > n = {}", self.m, self.n)));
        }
        let (lo, hi) = self.magnitude;
        if !(0.0 < lo && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("need 0 < magnitude lo <= hi, got ({lo}, {hi})")));
        }
        if hi > 10.0 {
            return Err(Error::Config("planted values must lie in the box [0, 10]".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        match self.model {
            ModelKind::L0Signal => {
                if self.s > self.n {
                    return Err(Error::Config(format!("need s <= n, got s = {}", self.s)));
                }
            }
            ModelKind::GroupL0 => {
                if !self.n.is_multiple_of(3) {
                    return Err(Error::Config(format!("group model needs n divisible by 3, got {}", self.n)));
                }
                if self.s > self.n / 3 {
                    return Err(Error::Config(format!(
                        "need at most n/3 = {} active groups, got {}",
                        self.n / 3,
                        self.s
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Data of one trial.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_true: Vec<f64>,
    pub x0: Vec<f64>,
}

/// The RNG of trial `t`: ChaCha8 keyed by `seed`, stream `t`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Gaussian `A` (rows orthonormalised or columns normalised), planted
/// `x_true`, `b = A x_true + σ·noise`.
pub fn generate_instance<R: Rng + ?Sized>(es: &ExperimentSpec, rng: &mut R) -> Instance {
    let (n, m) = (es.n, es.m);
    let mut a = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a.set(i, j, StandardNormal.sample(rng));
        }
    }
    match es.matrix {
        MatrixKind::OrthonormalRows => orthonormalize_rows(&mut a),
        MatrixKind::UnitColumns => a.normalize_columns(),
    }

    let mut x_true = vec![0.0; n];
    let (lo, hi) = es.magnitude;
    match es.model {
        ModelKind::L0Signal => {
            for j in sample(rng, n, es.s) {
                x_true[j] = rng.random_range(lo..=hi);
            }
        }
        ModelKind::GroupL0 => {
            for l in sample(rng, n / 3, es.s) {
                for j in 3 * l..3 * l + 3 {
                    let v: f64 = rng.random_range(lo..=hi);
                    x_true[j] = if rng.random_bool(0.5) { v } else { -v };
                }
            }
        }
    }

    let mut b = vec![0.0; m];
    a.apply(&x_true, &mut b);
    for bi in &mut b {
        let e = es.noise.sample(rng);
        if es.sigma != 0.0 {
            *bi += es.sigma * e;
        }
    }

    let x0 = match es.x0 {
        StartPoint::Constant(v) => vec![v; n],
        StartPoint::Uniform { lo, hi } => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
    };
    Instance { a, b, x_true, x0 }
}

/// Modified Gram–Schmidt on the rows, applied twice.
pub fn orthonormalize_rows(a: &mut DenseMatrix) {
    let m = a.nrows();
    let mut row = vec![0.0; a.ncols()];
    for _pass in 0..2 {
        for i in 0..m {
            row.copy_from_slice(a.row(i));
            for k in 0..i {
                let q = a.row(k);
                let d = dot(&row, q);
                axpy(-d, q, &mut row);
            }
            let norm = norm2(&row);
            for (t, v) in a.row_mut(i).iter_mut().zip(&row) {
                *t = v / norm;
            }
        }
    }
}

/// Problem, relaxation parameters and solver config for one instance.
pub fn build_problem(es: &ExperimentSpec, inst: &Instance) -> Result<(ProblemSpec, RelaxationParams, SolverConfig)> {
    let loss = LossModel::least_squares(Matrix::Dense(inst.a.clone()), inst.b.clone())?;
    let (bounds, groups) = match es.model {
        ModelKind::L0Signal => (BoxConstraint::uniform(es.n, 0.0, 10.0)?, GroupStructure::singletons(es.n)),
        ModelKind::GroupL0 => (
            BoxConstraint::uniform(es.n, -10.0, 10.0)?,
            GroupStructure::consecutive(es.n, 3, 1.0, GroupNorm::L1)?,
        ),
    };
    let lambda2 = match es.model {
        ModelKind::L0Signal => 0.0,
        ModelKind::GroupL0 => es.lambda2,
    };
    let spec = ProblemSpec::new(loss, bounds, groups, es.lambda1, lambda2)?;
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY)?.with_schedule(es.schedule_start, es.step_divisor)?;
    let cfg = es.solver.clone().with_x0(inst.x0.clone());
    Ok((spec, rp, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub mse: f64,
    #[serde(with = "crate::serde_ext::float")]
    pub psnr: f64,
    pub support_size: usize,
    /// Recovered support (coordinates, or groups for the group model) equals the planted one.
    pub support_exact: bool,
    pub iterations: usize,
    pub inner_mean: f64,
    pub last_step_norm: f64,
    pub wall_time: f64,
    pub certified: bool,
    pub converged: bool,
}

/// Everything a trial produced.
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub result: TrialResult,
    pub report: SolveReport,
    pub spec: ProblemSpec,
    pub rp: RelaxationParams,
    pub instance: Instance,
}

/// `‖y − x‖²/n`.
pub fn mse(y: &[f64], x_true: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidParameter("mse of an empty vector".into()));
    }
    if y.len() != x_true.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} entries", y.len(), x_true.len())));
    }
    Ok(y.iter().zip(x_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// `10 log10(V²/MSE)` with `V = max|y|`; `+∞` when the MSE is 0.
pub fn psnr(y: &[f64], x_true: &[f64]) -> Result<f64> {
    let e = mse(y, x_true)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    let v = y.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(10.0 * (v * v / e).log10())
}

fn group_support(x: &[f64]) -> Vec<bool> {
    x.chunks(3).map(|g| g.iter().any(|v| *v != 0.0)).collect()
}

/// Generates, solves and scores trial `trial`.
pub fn run_trial(es: &ExperimentSpec, trial: usize) -> Result<TrialDetail> {
    let mut rng = trial_rng(es.seed, trial);
    let instance = generate_instance(es, &mut rng);
    let (spec, rp, cfg) = build_problem(es, &instance)?;
    let report = solve(&spec, &rp, &cfg, es.algorithm)?;
    let x = &report.x_final;
    let support_exact = match es.model {
        ModelKind::L0Signal => x
            .iter()
            .zip(&instance.x_true)
            .all(|(a, b)| (*a != 0.0) == (*b != 0.0)),
        ModelKind::GroupL0 => group_support(x) == group_support(&instance.x_true),
    };
    let cert = certify(&spec, &rp, x, DEFAULT_CERTIFY_TOL)?;
    let inner_mean = if report.inner_counts.is_empty() {
        0.0
    } else {
        report.inner_counts.iter().sum::<usize>() as f64 / report.inner_counts.len() as f64
    };
    let result = TrialResult {
        trial,
        mse: mse(x, &instance.x_true)?,
        psnr: psnr(x, &instance.x_true)?,
        support_size: x.iter().filter(|v| **v != 0.0).count(),
        support_exact,
        iterations: report.iterations,
        inner_mean,
        last_step_norm: report.last_step_norm(),
        wall_time: report.wall_time,
        certified: cert.is_sw_d_stationary,
        converged: report.converged(),
    };
    Ok(TrialDetail {
        result,
        report,
        spec,
        rp,
        instance,
    })
}

/// Runs every trial, in parallel over at most `jobs` threads (`0` = rayon
/// default). Output is ordered by trial index.
pub fn run_trials(es: &ExperimentSpec, jobs: usize) -> Result<Vec<TrialDetail>> {
    es.validate()?;
    let work = || (0..es.trials).into_par_iter().map(|t| run_trial(es, t)).collect::<Result<Vec<_>>>();
    if jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)
    }
}

/// Means over trials, in the column order of the printed tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub trials: usize,
    pub mean_iterations: f64,
    pub mean_time: f64,
    pub mean_mse: f64,
    pub mean_last_step: f64,
    pub mean_support: f64,
    #[serde(with = "crate::serde_ext::float")]
    pub mean_psnr: f64,
    pub support_exact: usize,
    pub certified: usize,
    pub converged: usize,
}

impl Summary {
    pub fn from_results(label: impl Into<String>, results: &[TrialResult]) -> Self {
        let n = results.len().max(1) as f64;
        let mean = |f: &dyn Fn(&TrialResult) -> f64| results.iter().map(f).sum::<f64>() / n;
        Self {
            label: label.into(),
            trials: results.len(),
            mean_iterations: mean(&|r| r.iterations as f64),
            mean_time: mean(&|r| r.wall_time),
            mean_mse: mean(&|r| r.mse),
            mean_last_step: mean(&|r| r.last_step_norm),
            mean_support: mean(&|r| r.support_size as f64),
            mean_psnr: mean(&|r| r.psnr),
            support_exact: results.iter().filter(|r| r.support_exact).count(),
            certified: results.iter().filter(|r| r.certified).count(),
            converged: results.iter().filter(|r| r.converged).count(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub summary: Summary,
    pub trials: Vec<TrialResult>,
}

fn run_model(es: &ExperimentSpec, model: ModelKind, label: String, jobs: usize) -> Result<ExperimentOutcome> {
    if es.model != model {
        return Err(Error::Config(format!("experiment is for {:?}, not {model:?}", es.model)));
    }
    let trials: Vec<TrialResult> = run_trials(es, jobs)?.into_iter().map(|d| d.result).collect();
    Ok(ExperimentOutcome {
        spec: es.clone(),
        summary: Summary::from_results(label, &trials),
        trials,
    })
}

/// Sparse nonnegative signal recovery, one aggregated row.
pub fn run_signal_recovery(es: &ExperimentSpec, label: impl Into<String>, jobs: usize) -> Result<ExperimentOutcome> {
    run_model(es, ModelKind::L0Signal, label.into(), jobs)
}

/// Group-sparse recovery, one aggregated row.
pub fn run_group_recovery(es: &ExperimentSpec, label: impl Into<String>, jobs: usize) -> Result<ExperimentOutcome> {
    run_model(es, ModelKind::GroupL0, label.into(), jobs)
}

/// CSV with one row per summary: `label, trials, k, time, MSE, last_step, support, PSNR, exact, certified, converged`.
pub fn write_summary_csv<W: Write>(rows: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "trials",
        "mean_iterations",
        "mean_time_s",
        "mean_mse",
        "mean_last_step",
        "mean_support",
        "mean_psnr",
        "support_exact",
        "certified",
        "converged",
    ])?;
    for r in rows {
        w.write_record(&[
            r.label.clone(),
            r.trials.to_string(),
            r.mean_iterations.to_string(),
            r.mean_time.to_string(),
            r.mean_mse.to_string(),
            r.mean_last_step.to_string(),
            r.mean_support.to_string(),
            r.mean_psnr.to_string(),
            r.support_exact.to_string(),
            r.certified.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
