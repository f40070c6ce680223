//! Certificates for solver outputs: the `ν` lower-bound property, restricted
//! stationarity, exhaustive support enumeration for small instances, and
//! objective-gap traces.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::smoothness_constant;
use crate::model::{eval_primal, eval_relaxed, ProblemSpec, RelaxationParams};
use crate::solver::SolveReport;

pub const DEFAULT_CERTIFY_TOL: f64 = 1e-6;

/// `(ok, violations)`: `ok` iff every `x_j` is 0 or has `|x_j| ≥ ν`.
pub fn check_lower_bound(x: &[f64], nu: f64) -> (bool, Vec<usize>) {
    let violations: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0 && v.abs() < nu)
        .map(|(j, _)| j)
        .collect();
    (violations.is_empty(), violations)
}

/// Distance from 0 to `g + N_[l,u](t)` in one coordinate.
fn cone_distance(g: f64, t: f64, lo: f64, hi: f64) -> f64 {
    match (t <= lo, t >= hi) {
        (true, true) => 0.0,
        (true, false) => (-g).max(0.0),
        (false, true) => g.max(0.0),
        (false, false) => g.abs(),
    }
}

/// `sqrt(Σ_{j ∈ supp x} dist(0, [∂f(x)]_j + N_j(x_j))²)`.
///
/// On the support the ℓ1 part of `f` is differentiable, so `[∂f(x)]_j` is a
/// single number.
pub fn stationarity_residual(spec: &ProblemSpec, x: &[f64]) -> Result<f64> {
    let g = spec.loss().smooth_gradient(x)?;
    let extra = spec.loss().l1_extra();
    let (lo, hi) = (spec.bounds().lower(), spec.bounds().upper());
    let sum: f64 = x
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != 0.0)
        .map(|(j, &t)| {
            let d = cone_distance(g[j] + extra * t.signum(), t, lo[j], hi[j]);
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lower_bound_ok: bool,
    pub violations: Vec<usize>,
    pub stationarity_residual: f64,
    pub is_sw_d_stationary: bool,
    pub support: Vec<usize>,
    pub f_primal: f64,
    pub f_relaxed: f64,
    pub nu: f64,
    pub tol: f64,
}

/// Lower bound plus restricted stationarity within `tol`. A certified point
/// is a ν-strong local minimizer of the ℓ0 problem and a stationary point of
/// the relaxation, with equal objective values.
pub fn certify(spec: &ProblemSpec, rp: &RelaxationParams, x: &[f64], tol: f64) -> Result<Certificate> {
    if x.len() != spec.n() {
        return Err(Error::DimensionMismatch(format!(
            "candidate has {} entries, problem has n = {}",
            x.len(),
            spec.n()
        )));
    }
    let (lower_bound_ok, violations) = check_lower_bound(x, rp.nu);
    let residual = stationarity_residual(spec, x)?;
    let in_box = spec.bounds().contains(x);
    Ok(Certificate {
        lower_bound_ok,
        violations,
        stationarity_residual: residual,
        is_sw_d_stationary: in_box && lower_bound_ok && residual <= tol,
        support: x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect(),
        f_primal: eval_primal(spec, x)?,
        f_relaxed: eval_relaxed(spec, x, rp.nu)?,
        nu: rp.nu,
        tol,
    })
}

/// Largest dimension [`global_oracle`] accepts.
pub const ORACLE_MAX_N: usize = 12;
const ORACLE_STEP_TOL: f64 = 1e-10;
const ORACLE_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimizer {
    /// Coordinates allowed to be nonzero.
    pub allowed: Vec<usize>,
    pub x: Vec<f64>,
    pub f_primal: f64,
    /// Satisfies the `ν` lower bound.
    pub nu_strong: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x_global: Vec<f64>,
    pub f_global: f64,
    /// One entry per subset of coordinates, in subset-bitmask order.
    pub local_minimizers: Vec<LocalMinimizer>,
}

impl OracleResult {
    pub fn nu_strong(&self) -> impl Iterator<Item = &LocalMinimizer> {
        self.local_minimizers.iter().filter(|m| m.nu_strong)
    }
}

/// Enumerates all `2^n` supports. For each, minimises `f` over the box with
/// the other coordinates fixed at 0 by proximal gradient steps of length
/// `1/L_s` until a step moves less than `1e-10`.
pub fn global_oracle(spec: &ProblemSpec, rp: &RelaxationParams) -> Result<OracleResult> {
    let n = spec.n();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge {
            what: "support enumeration",
            n,
            limit: ORACLE_MAX_N,
        });
    }
    let ls = smoothness_constant(spec.loss(), spec.bounds())?;
    let minimizers: Vec<LocalMinimizer> = (0u32..(1u32 << n))
        .into_par_iter()
        .map(|mask| restricted_minimizer(spec, rp, ls, mask))
        .collect::<Result<_>>()?;
    let best = minimizers
        .iter()
        .min_by(|a, b| a.f_primal.total_cmp(&b.f_primal))
        .expect("at least the empty support");
    Ok(OracleResult {
        x_global: best.x.clone(),
        f_global: best.f_primal,
        local_minimizers: minimizers,
    })
}

fn restricted_minimizer(spec: &ProblemSpec, rp: &RelaxationParams, ls: f64, mask: u32) -> Result<LocalMinimizer> {
    let n = spec.n();
    let allowed: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
    let extra = spec.loss().l1_extra() / ls;
    let mut x = vec![0.0; n];
    let mut steps = 0;
    if !allowed.is_empty() {
        while steps < ORACLE_MAX_STEPS {
            steps += 1;
            let g = spec.loss().smooth_gradient(&x)?;
            let mut moved = 0.0;
            for &j in &allowed {
                let z = x[j] - g[j] / ls;
                let t = if z.abs() > extra { z - extra * z.signum() } else { 0.0 };
                let t = spec.bounds().clip(j, t);
                moved += (t - x[j]) * (t - x[j]);
                x[j] = t;
            }
            if moved.sqrt() <= ORACLE_STEP_TOL {
                break;
            }
        }
    }
    let (nu_strong, _) = check_lower_bound(&x, rp.nu);
    Ok(LocalMinimizer {
        allowed,
        f_primal: eval_primal(spec, &x)?,
        x,
        nu_strong,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: usize,
    pub gap: f64,
    pub inv_k: f64,
    pub inv_k2: f64,
    pub inv_k3: f64,
}

/// `|F(x^k; μ_k) − F*|` with `k^{-1}, k^{-2}, k^{-3}` reference columns.
/// `f_star` defaults to the final value. Rows start at `k = 1`.
pub fn rate_trace(report: &SolveReport, f_star: Option<f64>) -> Vec<RateRow> {
    let Some(last) = report.trace.last() else {
        return Vec::new();
    };
    let f_star = f_star.unwrap_or(last.f_relaxed);
    report
        .trace
        .iter()
        .skip(1)
        .map(|r| {
            let k = r.k as f64;
            RateRow {
                k: r.k,
                gap: (r.f_relaxed - f_star).abs(),
                inv_k: 1.0 / k,
                inv_k2: 1.0 / (k * k),
                inv_k3: 1.0 / (k * k * k),
            }
        })
        .collect()
}

/// First `k` from which the gap stays strictly below `k^{-3}`, if that happens
/// before the last row.
pub fn below_cubic_from(rows: &[RateRow]) -> Option<usize> {
    let last = rows.last()?.k;
    let mut from = None;
    for r in rows {
        if r.gap < r.inv_k3 {
            from.get_or_insert(r.k);
        } else {
            from = None;
        }
    }
    from.filter(|k| *k < last)
}

pub fn write_rate_csv<W: Write>(rows: &[RateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "gap", "k^-1", "k^-2", "k^-3"])?;
    for r in rows {
        w.write_record(&[
            r.k.to_string(),
            r.gap.to_string(),
            r.inv_k.to_string(),
            r.inv_k2.to_string(),
            r.inv_k3.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, Matrix};
    use crate::losses::LossModel;
    use crate::model::{BoxConstraint, GroupStructure};

    /// `f = (x₁ − 2)² + (x₂ − 0.1)²`, λ1 = 1, box [0, 10]².
    fn two_d() -> (ProblemSpec, RelaxationParams) {
        let loss = LossModel::least_squares(Matrix::Dense(DenseMatrix::identity(2)), vec![2.0, 0.1]).unwrap();
        let spec = ProblemSpec::new(
            loss,
            BoxConstraint::uniform(2, 0.0, 10.0).unwrap(),
            GroupStructure::singletons(2),
            1.0,
            0.0,
        )
        .unwrap();
        let rp = RelaxationParams::derive(&spec, 0.99).unwrap();
        (spec, rp)
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(check_lower_bound(&[0.0, 0.5, -1.0], 0.3), (true, vec![]));
        assert_eq!(check_lower_bound(&[0.1], 0.3), (false, vec![0]));
        assert!(check_lower_bound(&[0.3], 0.3).0);
    }

    #[test]
    fn residual_examples() {
        let (spec, _) = two_d();
        assert_eq!(stationarity_residual(&spec, &[2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(stationarity_residual(&spec, &[1.0, 0.0]).unwrap(), 2.0);
        // at the upper bound with a negative gradient the cone absorbs it
        let loss = LossModel::least_squares(Matrix::Dense(DenseMatrix::identity(1)), vec![20.0]).unwrap();
        let s = ProblemSpec::new(loss, BoxConstraint::uniform(1, 0.0, 10.0).unwrap(), GroupStructure::singletons(1), 1.0, 0.0)
            .unwrap();
        assert_eq!(stationarity_residual(&s, &[10.0]).unwrap(), 0.0);
    }

    #[test]
    fn certify_examples() {
        let (spec, rp) = two_d();
        let c = certify(&spec, &rp, &[2.0, 0.0], DEFAULT_CERTIFY_TOL).unwrap();
        assert!(c.is_sw_d_stationary);
        assert!((c.f_primal - c.f_relaxed).abs() <= 1e-12 * c.f_primal.abs());
        assert!((c.f_primal - 1.01).abs() < 1e-12);
        let bad = certify(&spec, &rp, &[0.1 * rp.nu, 0.0], DEFAULT_CERTIFY_TOL).unwrap();
        assert!(!bad.is_sw_d_stationary && !bad.lower_bound_ok);
        assert!(certify(&spec, &rp, &[0.0, 0.0], DEFAULT_CERTIFY_TOL).unwrap().is_sw_d_stationary);
    }

    #[test]
    fn oracle_two_d_values() {
        let (spec, rp) = two_d();
        let o = global_oracle(&spec, &rp).unwrap();
        // hand-minimised per support: ∅, {1}, {2}, {1,2}
        let expected = [4.01, 1.01, 5.0, 2.0];
        for (m, e) in o.local_minimizers.iter().zip(expected) {
            assert!((m.f_primal - e).abs() < 1e-9, "{m:?}");
        }
        assert!((o.f_global - 1.01).abs() < 1e-9);
        assert!((o.x_global[0] - 2.0).abs() < 1e-9 && o.x_global[1] == 0.0);
    }

    #[test]
    fn oracle_scalar_square_is_zero() {
        let loss = LossModel::least_squares(Matrix::Dense(DenseMatrix::identity(1)), vec![0.0]).unwrap();
        let spec = ProblemSpec::new(loss, BoxConstraint::uniform(1, -1.0, 1.0).unwrap(), GroupStructure::singletons(1), 0.5, 0.0)
            .unwrap();
        let rp = RelaxationParams::derive(&spec, 0.99).unwrap();
        let o = global_oracle(&spec, &rp).unwrap();
        assert_eq!(o.x_global, vec![0.0]);
    }

    #[test]
    fn oracle_refuses_large() {
        let n = 13;
        let loss = LossModel::least_squares(Matrix::Dense(DenseMatrix::identity(n)), vec![1.0; n]).unwrap();
        let spec = ProblemSpec::new(loss, BoxConstraint::uniform(n, 0.0, 1.0).unwrap(), GroupStructure::singletons(n), 1.0, 0.0)
            .unwrap();
        let rp = RelaxationParams::derive(&spec, 0.99).unwrap();
        assert!(matches!(global_oracle(&spec, &rp), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn cubic_window_detection() {
        let rows: Vec<RateRow> = [1.0, 0.5, 1e-4, 1e-6, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &gap)| {
                let k = (i + 1) as f64;
                RateRow { k: i + 1, gap, inv_k: 1.0 / k, inv_k2: 1.0 / (k * k), inv_k3: 1.0 / (k * k * k) }
            })
            .collect();
        assert_eq!(below_cubic_from(&rows), Some(3));
        assert_eq!(below_cubic_from(&rows[..1]), None);
    }
}
