//! Random small instances and trace checks shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sgdc::linalg::{DenseMatrix, Matrix};
use sgdc::losses::LossModel;
use sgdc::model::{BoxConstraint, GroupNorm, GroupStructure, ProblemSpec, RelaxationParams, DEFAULT_SAFETY};
use sgdc::solver::{Algorithm, SolveReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallKind {
    /// Least squares with `m = n + 2`, a finite box and overlapping `p = 1` groups.
    LsOverlap,
    /// Logistic regression on an unbounded box with disjoint `p = 2` groups.
    /// Every coordinate axis appears once with each label, so the loss is coercive.
    LogisticDisjoint,
}

pub struct Small {
    pub spec: ProblemSpec,
    pub rp: RelaxationParams,
    pub cfg: SolverConfig,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, size: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut s = idx[..size].to_vec();
    s.sort_unstable();
    s
}

pub fn small_instance(seed: u64, kind: SmallKind, n: usize) -> Small {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda1 = rng.random_range(0.05..1.0);
    let lambda2 = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..0.5) };
    let (spec, x0) = match kind {
        SmallKind::LsOverlap => {
            let m = n + 2;
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| gaussian(&mut rng)).collect()).collect();
            let a = DenseMatrix::from_rows(&rows).unwrap();
            let nonneg = rng.random_bool(0.5);
            let hi = rng.random_range(2.0..5.0);
            let lo = if nonneg { 0.0 } else { -rng.random_range(2.0..5.0) };
            let mut x_true = vec![0.0; n];
            for j in random_subset(&mut rng, n, n / 3 + 1) {
                let v: f64 = rng.random_range(0.5..2.0);
                x_true[j] = if nonneg || rng.random_bool(0.5) { v } else { -v };
            }
            let b: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(&x_true).map(|(a, x)| a * x).sum::<f64>() + 0.1 * gaussian(&mut rng))
                .collect();
            // Consecutive pairs cover every index; random extra groups overlap them.
            let mut groups: Vec<Vec<usize>> = (0..n).step_by(2).map(|s| (s..(s + 2).min(n)).collect()).collect();
            for _ in 0..rng.random_range(1..=n / 2 + 1) {
                let size = rng.random_range(2..=3.min(n));
                groups.push(random_subset(&mut rng, n, size));
            }
            let weights = groups.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let spec = ProblemSpec::new(
                LossModel::least_squares(Matrix::Dense(a), b).unwrap(),
                BoxConstraint::uniform(n, lo, hi).unwrap(),
                GroupStructure::new(n, groups, weights, GroupNorm::L1).unwrap(),
                lambda1,
                lambda2,
            )
            .unwrap();
            let x0 = (0..n).map(|_| rng.random_range(lo..=hi)).collect::<Vec<f64>>();
            (spec, x0)
        }
        SmallKind::LogisticDisjoint => {
            let m = n + 2;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..m {
                rows.push((0..n).map(|_| gaussian(&mut rng)).collect());
                labels.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            }
            for j in 0..n {
                for label in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[j] = 0.5;
                    rows.push(e);
                    labels.push(label);
                }
            }
            let a = DenseMatrix::from_rows(&rows).unwrap();
            let size = rng.random_range(1..=3);
            let groups: Vec<Vec<usize>> = (0..n).step_by(size).map(|s| (s..(s + size).min(n)).collect()).collect();
            let weights = groups.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let spec = ProblemSpec::new(
                LossModel::logistic(Matrix::Dense(a), labels).unwrap(),
                BoxConstraint::unbounded(n),
                GroupStructure::new(n, groups, weights, GroupNorm::L2).unwrap(),
                lambda1,
                lambda2,
            )
            .unwrap();
            let x0 = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
            (spec, x0)
        }
    };
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY).unwrap();
    let cfg = SolverConfig::default().with_x0(x0);
    Small { spec, rp, cfg }
}

/// Relative slack for comparisons between objective values that were summed
/// in different orders.
pub fn slack(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Checks the per-step guarantees recorded in a trace. `window` is the `N`
/// the run used.
pub fn check_mechanics(r: &SolveReport, window: usize) -> Result<(), String> {
    let k_pin = r.pinned_from;
    for (k, rec) in r.trace.iter().enumerate().skip(1) {
        if rec.k != k {
            return Err(format!("trace row {k} has k = {}", rec.k));
        }
        let alpha = rec.alpha.ok_or_else(|| format!("row {k} has no modulus"))?;
        if !(alpha <= r.alpha_bound) {
            return Err(format!("row {k}: modulus {alpha} above bound {}", r.alpha_bound));
        }
        if r.algorithm == Algorithm::LineSearch {
            let accept = rec.accept_value.ok_or("missing acceptance value")?;
            let wmax = rec.window_max.ok_or("missing window max")?;
            if !(accept <= wmax - 0.5 * r.c * rec.step_norm * rec.step_norm) {
                return Err(format!("row {k}: acceptance inequality fails: {accept} > {wmax} - c/2 |d|^2"));
            }
            if k > k_pin {
                // Both sides are at mu = nu here, so they are visible in the trace.
                if (accept - rec.f_nu).abs() > slack(accept) {
                    return Err(format!("row {k}: acceptance value {accept} differs from F(x; nu) {}", rec.f_nu));
                }
                let lo = (k - 1).saturating_sub(window);
                let expect = r.trace[lo..k].iter().map(|t| t.f_nu).fold(f64::NEG_INFINITY, f64::max);
                if lo >= k_pin && (wmax - expect).abs() > slack(wmax) {
                    return Err(format!("row {k}: window max {wmax} differs from the trace ({expect})"));
                }
            }
            if window == 0 && k > k_pin && rec.f_nu > r.trace[k - 1].f_nu + slack(rec.f_nu) {
                return Err(format!("row {k}: F(.; nu) increased with N = 0"));
            }
        } else {
            if alpha != r.ls {
                return Err(format!("row {k}: extrapolation modulus {alpha} != Ls {}", r.ls));
            }
            if k > k_pin && k >= 2 {
                let lyap = |t: &sgdc::solver::IterationRecord| t.f_nu + 0.5 * r.ls * t.step_norm * t.step_norm;
                let (now, before) = (lyap(rec), lyap(&r.trace[k - 1]));
                if now > before + slack(before) {
                    return Err(format!("row {k}: Lyapunov value rose from {before} to {now}"));
                }
            }
        }
    }
    Ok(())
}
