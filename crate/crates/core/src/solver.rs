//! The two DC algorithms with `μ` continuation.
//!
//! Both linearise the concave part `Θ(·; μ_k)` at `x^k` through one element
//! `ξ^k` of its subdifferential and then solve a proximal subproblem in closed
//! form. [`dca_line_search`] picks the step modulus by a nonmonotone backtracking
//! test; [`dca_extrapolation`] uses the fixed modulus `L_s` at an extrapolated
//! point.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::losses::smoothness_constant;
use crate::model::relaxation::{index_vectors_with_norms, theta_subgradient_unchecked};
use crate::model::{ObjectiveCache, ProblemSpec, RelaxationParams};
use crate::prox::{check_supported, prox_into, ProxRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    LineSearch,
    Extrapolation,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::LineSearch => "line-search",
            Algorithm::Extrapolation => "extrapolation",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "line-search" | "ls" | "1" => Ok(Algorithm::LineSearch),
            "extrapolation" | "ex" | "2" => Ok(Algorithm::Extrapolation),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected line-search or extrapolation)"
            ))),
        }
    }
}

/// Step-size and stopping parameters. `None` fields resolve against `L_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Backtracking factor `ρ > 1`.
    pub rho: f64,
    /// Sufficient-decrease constant `c ∈ (0, L_s]`; `L_s/2` when unset.
    pub c: Option<f64>,
    /// Initial trial modulus `α_k^B`; `L_s/2` when unset. Clamped to `[alpha_lo, alpha_hi]`.
    pub alpha_init: Option<f64>,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Nonmonotone window `N`: compare against the max of the last `N + 1` values.
    pub window: usize,
    /// Constant extrapolation weight `β ∈ [0, 1)`.
    pub beta: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Starting point; zeros when unset. Need not lie in the box.
    pub x0: Option<Vec<f64>>,
    /// Overrides the computed `L_s`.
    pub smoothness: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 2.0,
            c: None,
            alpha_init: None,
            alpha_lo: 1e-8,
            alpha_hi: 1e8,
            window: 1,
            beta: 0.0,
            tol: 1e-15,
            max_outer: 10_000,
            x0: None,
            smoothness: None,
        }
    }
}

impl SolverConfig {
    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    fn validate(&self, n: usize, ls: f64, algorithm: Algorithm) -> Result<()> {
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be > 1, got {}", self.rho)));
        }
        if !(self.alpha_lo > 0.0 && self.alpha_lo <= self.alpha_hi && self.alpha_hi.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < alpha_lo <= alpha_hi, got {} and {}",
                self.alpha_lo, self.alpha_hi
            )));
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c <= ls) {
                return Err(Error::Config(format!("c must lie in (0, Ls = {ls}], got {c}")));
            }
        }
        if let Some(a) = self.alpha_init {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha_init must be positive, got {a}")));
            }
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if algorithm == Algorithm::LineSearch && self.beta != 0.0 {
            return Err(Error::Config(
                "beta is an extrapolation parameter; the line-search algorithm takes none".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be >= 0, got {}", self.tol)));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "x0 has {} entries, problem has n = {n}",
                    x0.len()
                )));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("x0 must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    MaxOuter,
}

/// One row per iterate `x^k`, `k = 0, …, iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `μ_k`.
    pub mu: f64,
    /// `F(x^k; μ_k)`.
    pub f_relaxed: f64,
    /// `F(x^k; ν)`.
    pub f_nu: f64,
    /// `F_0(x^k)`.
    pub f_primal: f64,
    pub support_size: usize,
    /// `‖x^k − x^{k−1}‖`, 0 at `k = 0`.
    pub step_norm: f64,
    /// Modulus that produced `x^k`.
    pub alpha: Option<f64>,
    /// Trial steps the line search spent on `x^k`.
    pub inner_iters: Option<usize>,
    /// Line search only: `F(x^k; μ_{k−1})`, the left side of the acceptance test.
    pub accept_value: Option<f64>,
    /// Line search only: `max_j F(x^j; μ_{k−1})` over the window.
    pub window_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportChange {
    pub k: usize,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub x_final: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub nu: f64,
    pub ls: f64,
    pub lf: f64,
    /// Sufficient-decrease constant actually used.
    pub c: f64,
    /// Upper bound `max{alpha_hi, ρ L_s}` on accepted moduli.
    pub alpha_bound: f64,
    /// First `k` with `μ_k = ν`.
    pub pinned_from: usize,
    pub trace: Vec<IterationRecord>,
    pub alpha_trace: Vec<f64>,
    pub inner_counts: Vec<usize>,
    /// Support of `x^0` and every later change.
    pub support_trace: Vec<SupportChange>,
    /// Iterate from which the support never changes.
    pub support_identified_at: usize,
    pub wall_time: f64,
}

impl SolveReport {
    fn empty(algorithm: Algorithm, rp: &RelaxationParams) -> Self {
        Self {
            algorithm,
            x_final: Vec::new(),
            iterations: 0,
            stop_reason: StopReason::Tol,
            nu: rp.nu,
            ls: 0.0,
            lf: rp.lf,
            c: 0.0,
            alpha_bound: 0.0,
            pinned_from: rp.schedule.pinned_from(),
            trace: Vec::new(),
            alpha_trace: Vec::new(),
            inner_counts: Vec::new(),
            support_trace: Vec::new(),
            support_identified_at: 0,
            wall_time: 0.0,
        }
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Tol
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.trace.last()
    }

    /// Support of `x^k`.
    pub fn support_at(&self, k: usize) -> &[usize] {
        let pos = self.support_trace.partition_point(|c| c.k <= k);
        &self.support_trace[pos.saturating_sub(1)].support
    }

    /// `‖x^{final} − x^{final−1}‖`.
    pub fn last_step_norm(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.step_norm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Trace CSV: `k, mu, F_relaxed, F_primal, support_size, step_norm, alpha, inner_iters`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "k",
            "mu",
            "F_relaxed",
            "F_primal",
            "support_size",
            "step_norm",
            "alpha",
            "inner_iters",
        ])?;
        for r in &self.trace {
            w.write_record(&[
                r.k.to_string(),
                r.mu.to_string(),
                r.f_relaxed.to_string(),
                r.f_primal.to_string(),
                r.support_size.to_string(),
                r.step_norm.to_string(),
                r.alpha.map_or(String::new(), |a| a.to_string()),
                r.inner_iters.map_or(String::new(), |m| m.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn support_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// One iterate with its cached objective data.
struct Point {
    x: Vec<f64>,
    ax: Vec<f64>,
    cache: ObjectiveCache,
}

impl Point {
    fn new(spec: &ProblemSpec, x: Vec<f64>) -> Result<Self> {
        let ax = spec.loss().image(&x);
        let f = spec.loss().value_at_image(&x, &ax)?;
        let cache = ObjectiveCache::new(spec, &x, f);
        Ok(Self { x, ax, cache })
    }
}

struct Recorder<'a> {
    spec: &'a ProblemSpec,
    rp: &'a RelaxationParams,
    trace: Vec<IterationRecord>,
    support_trace: Vec<SupportChange>,
}

impl<'a> Recorder<'a> {
    fn new(spec: &'a ProblemSpec, rp: &'a RelaxationParams) -> Self {
        Self {
            spec,
            rp,
            trace: Vec::new(),
            support_trace: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        p: &Point,
        step_norm: f64,
        alpha: Option<f64>,
        inner_iters: Option<usize>,
        accept_value: Option<f64>,
        window_max: Option<f64>,
    ) {
        let k = self.trace.len();
        let mu = self.rp.schedule.mu_at(k);
        let support = support_of(&p.x);
        self.trace.push(IterationRecord {
            k,
            mu,
            f_relaxed: p.cache.relaxed(self.spec, mu),
            f_nu: p.cache.relaxed(self.spec, self.rp.nu),
            f_primal: p.cache.primal(self.spec),
            support_size: support.len(),
            step_norm,
            alpha,
            inner_iters,
            accept_value,
            window_max,
        });
        if self.support_trace.last().is_none_or(|c| c.support != support) {
            self.support_trace.push(SupportChange { k, support });
        }
    }
}

struct Setup {
    ls: f64,
    c: f64,
    alpha_init: f64,
    alpha_bound: f64,
    inner_limit: usize,
}

fn setup(spec: &ProblemSpec, rp: &RelaxationParams, cfg: &SolverConfig, algorithm: Algorithm) -> Result<Setup> {
    rp.validate(spec)?;
    check_supported(spec)?;
    let ls = match cfg.smoothness {
        Some(v) => v,
        None => smoothness_constant(spec.loss(), spec.bounds())?,
    };
    if !(ls > 0.0 && ls.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothness constant must be positive and finite, got {ls}"
        )));
    }
    cfg.validate(spec.n(), ls, algorithm)?;
    let c = cfg.c.unwrap_or(ls / 2.0);
    let alpha_init = cfg.alpha_init.unwrap_or(ls / 2.0).clamp(cfg.alpha_lo, cfg.alpha_hi);
    let alpha_bound = cfg.alpha_hi.max(cfg.rho * ls);
    let inner_limit = ((alpha_bound.ln() - cfg.alpha_lo.ln()) / cfg.rho.ln()).floor() as usize + 1;
    Ok(Setup {
        ls,
        c,
        alpha_init,
        alpha_bound,
        inner_limit,
    })
}

fn check_feasible(spec: &ProblemSpec, x: &[f64], k: usize) -> Result<()> {
    if spec.bounds().contains(x) {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!("iterate {k} left the box")))
    }
}

/// `ξ^k − ∇f_s(center)` pieces: returns `∇f_s(center) − ξ^k`.
fn shifted_direction(spec: &ProblemSpec, lin: &Point, mu: f64, center_ax: &[f64]) -> Result<Vec<f64>> {
    let iv = index_vectors_with_norms(&lin.x, mu, lin.cache.group_norms());
    let xi = theta_subgradient_unchecked(&lin.x, mu, &iv, lin.cache.group_norms(), spec);
    let mut g = vec![0.0; spec.n()];
    spec.loss().smooth_gradient_at_image(center_ax, &mut g)?;
    for (gj, xj) in g.iter_mut().zip(&xi) {
        *gj -= xj;
    }
    Ok(g)
}

fn prox_step(spec: &ProblemSpec, center: &[f64], dir: &[f64], alpha: f64, mu: f64) -> Result<Vec<f64>> {
    let z: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c - d / alpha).collect();
    let mut out = vec![0.0; z.len()];
    prox_into(&ProxRequest::new(&z, alpha, mu, spec)?, &mut out)?;
    Ok(out)
}

fn finish(
    algorithm: Algorithm,
    rp: &RelaxationParams,
    s: &Setup,
    rec: Recorder<'_>,
    x: Vec<f64>,
    stop_reason: StopReason,
    started: Instant,
) -> SolveReport {
    let alpha_trace = rec.trace.iter().filter_map(|r| r.alpha).collect();
    let inner_counts = rec.trace.iter().filter_map(|r| r.inner_iters).collect();
    let support_identified_at = rec.support_trace.last().map_or(0, |c| c.k);
    SolveReport {
        algorithm,
        x_final: x,
        iterations: rec.trace.len() - 1,
        stop_reason,
        nu: rp.nu,
        ls: s.ls,
        lf: rp.lf,
        c: s.c,
        alpha_bound: s.alpha_bound,
        pinned_from: rp.schedule.pinned_from(),
        trace: rec.trace,
        alpha_trace,
        inner_counts,
        support_trace: rec.support_trace,
        support_identified_at,
        wall_time: started.elapsed().as_secs_f64(),
    }
}

fn stop_check(rp: &RelaxationParams, cfg: &SolverConfig, k: usize, prev: &Point, next: &Point, spec: &ProblemSpec) -> bool {
    k >= rp.schedule.pinned_from()
        && (next.cache.relaxed(spec, rp.nu) - prev.cache.relaxed(spec, rp.nu)).abs() <= cfg.tol
}

/// DC algorithm with nonmonotone line search.
///
/// At outer step `k`, with `μ = μ_k` and `d = ∇f_s(x^k) − ξ^k`, trial moduli
/// `α = α^B ρ^m` are tried until
/// `F(x(α); μ) ≤ max_{k−N ≤ j ≤ k} F(x^j; μ) − (c/2)‖x(α) − x^k‖²`,
/// where `x(α)` is the prox of `x^k − d/α`. Old iterates are re-evaluated at
/// the current `μ`.
pub fn dca_line_search(spec: &ProblemSpec, rp: &RelaxationParams, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    if spec.n() == 0 {
        return Ok(SolveReport::empty(Algorithm::LineSearch, rp));
    }
    let s = setup(spec, rp, cfg, Algorithm::LineSearch)?;
    let mut rec = Recorder::new(spec, rp);
    let mut cur = Point::new(spec, cfg.x0.clone().unwrap_or_else(|| vec![0.0; spec.n()]))?;
    rec.push(&cur, 0.0, None, None, None, None);
    let mut history: VecDeque<ObjectiveCache> = VecDeque::with_capacity(cfg.window + 1);
    history.push_back(cur.cache.clone());

    let mut k = 0;
    let stop_reason = loop {
        if k >= cfg.max_outer {
            break StopReason::MaxOuter;
        }
        let mu = rp.schedule.mu_at(k);
        let dir = shifted_direction(spec, &cur, mu, &cur.ax)?;
        let window_max = history
            .iter()
            .map(|h| h.relaxed(spec, mu))
            .fold(f64::NEG_INFINITY, f64::max);

        let mut alpha = s.alpha_init;
        let mut trials = 0;
        let (next, value) = loop {
            trials += 1;
            let cand = Point::new(spec, prox_step(spec, &cur.x, &dir, alpha, mu)?)?;
            let value = cand.cache.relaxed(spec, mu);
            let step2 = dist2(&cand.x, &cur.x).powi(2);
            if value <= window_max - 0.5 * s.c * step2 {
                break (cand, value);
            }
            if trials >= s.inner_limit {
                return Err(Error::SmoothnessInvalid {
                    outer: k,
                    limit: s.inner_limit,
                });
            }
            alpha *= cfg.rho;
        };
        if alpha > s.alpha_bound {
            return Err(Error::ContractViolation(format!(
                "accepted modulus {alpha} exceeds the bound {}",
                s.alpha_bound
            )));
        }
        check_feasible(spec, &next.x, k + 1)?;
        let step = dist2(&next.x, &cur.x);
        rec.push(&next, step, Some(alpha), Some(trials), Some(value), Some(window_max));
        if history.len() > cfg.window {
            history.pop_front();
        }
        history.push_back(next.cache.clone());
        let done = stop_check(rp, cfg, k, &cur, &next, spec);
        cur = next;
        k += 1;
        if done {
            break StopReason::Tol;
        }
    };
    Ok(finish(Algorithm::LineSearch, rp, &s, rec, cur.x, stop_reason, started))
}

/// DC algorithm with extrapolation: `y^k = x^k + β(x^k − x^{k−1})` and
/// `x^{k+1} = prox_{L_s}(y^k − (∇f_s(y^k) − ξ^k)/L_s)` with `ξ^k` taken at `x^k`.
pub fn dca_extrapolation(spec: &ProblemSpec, rp: &RelaxationParams, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    if spec.n() == 0 {
        return Ok(SolveReport::empty(Algorithm::Extrapolation, rp));
    }
    let s = setup(spec, rp, cfg, Algorithm::Extrapolation)?;
    let mut rec = Recorder::new(spec, rp);
    let mut cur = Point::new(spec, cfg.x0.clone().unwrap_or_else(|| vec![0.0; spec.n()]))?;
    let mut prev_x = cur.x.clone();
    rec.push(&cur, 0.0, None, None, None, None);

    let mut k = 0;
    let stop_reason = loop {
        if k >= cfg.max_outer {
            break StopReason::MaxOuter;
        }
        let mu = rp.schedule.mu_at(k);
        let next_x = if cfg.beta == 0.0 || prev_x == cur.x {
            let dir = shifted_direction(spec, &cur, mu, &cur.ax)?;
            prox_step(spec, &cur.x, &dir, s.ls, mu)?
        } else {
            let y: Vec<f64> = cur
                .x
                .iter()
                .zip(&prev_x)
                .map(|(a, b)| a + cfg.beta * (a - b))
                .collect();
            let ay = spec.loss().image(&y);
            let dir = shifted_direction(spec, &cur, mu, &ay)?;
            prox_step(spec, &y, &dir, s.ls, mu)?
        };
        let next = Point::new(spec, next_x)?;
        check_feasible(spec, &next.x, k + 1)?;
        rec.push(&next, dist2(&next.x, &cur.x), Some(s.ls), None, None, None);
        let done = stop_check(rp, cfg, k, &cur, &next, spec);
        prev_x = std::mem::replace(&mut cur, next).x;
        k += 1;
        if done {
            break StopReason::Tol;
        }
    };
    Ok(finish(Algorithm::Extrapolation, rp, &s, rec, cur.x, stop_reason, started))
}

/// Runs `algorithm` with the defaults of [`SolverConfig`] filled against `L_s`.
pub fn solve(
    spec: &ProblemSpec,
    rp: &RelaxationParams,
    cfg: &SolverConfig,
    algorithm: Algorithm,
) -> Result<SolveReport> {
    match algorithm {
        Algorithm::LineSearch => dca_line_search(spec, rp, cfg),
        Algorithm::Extrapolation => dca_extrapolation(spec, rp, cfg),
    }
}
