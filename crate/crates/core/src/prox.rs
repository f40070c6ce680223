//! Closed-form solutions of the per-iteration subproblem
//!
//! ```text
//! argmin_{x ∈ box}  f̄_n(x; μ) + (α/2)‖x − z‖²,
//! f̄_n(x; μ) = f_n(x) + (λ1/μ)‖x‖₁ + (λ2/μ) Σ w_l ‖x_(l)‖_p
//! ```
//!
//! and a derivative-free oracle used to test them.

use crate::error::{Error, Result};
use crate::model::{GroupNorm, ProblemSpec};

/// Inputs of one subproblem. `z` is the already shifted point
/// `center − (∇f_s(center) − ξ)/α`.
#[derive(Debug, Clone, Copy)]
pub struct ProxRequest<'a> {
    pub z: &'a [f64],
    pub alpha: f64,
    pub mu: f64,
    pub spec: &'a ProblemSpec,
}

impl<'a> ProxRequest<'a> {
    pub fn new(z: &'a [f64], alpha: f64, mu: f64, spec: &'a ProblemSpec) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if z.len() != spec.n() {
            return Err(Error::DimensionMismatch(format!(
                "z has {} entries, problem has n = {}",
                z.len(),
                spec.n()
            )));
        }
        Ok(Self { z, alpha, mu, spec })
    }

    /// `f̄_n(x; μ) + (α/2)‖x − z‖²`, `+∞` outside the box.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = x.iter().zip(self.z).map(|(a, b)| (a - b) * (a - b)).sum();
        self.penalty(x) + 0.5 * self.alpha * quad
    }

    /// `f̄_n(x; μ)`, `+∞` outside the box.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        let spec = self.spec;
        if !spec.bounds().contains(x) {
            return f64::INFINITY;
        }
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let groups: f64 = spec
            .groups()
            .group_norms(x)
            .iter()
            .zip(spec.groups().weights())
            .map(|(s, w)| s * w)
            .sum();
        spec.loss().l1_extra() * l1 + spec.lambda1() / self.mu * l1 + spec.lambda2() / self.mu * groups
    }
}

fn shrink_clip(z: f64, tau: f64, lo: f64, hi: f64) -> f64 {
    if z.abs() > tau {
        let shrunk = z.signum() * (z.abs() - tau);
        let clipped = shrunk.max(lo).min(hi);
        // the box contains 0; a clip onto a zero bound must still be +0.0
        if clipped == 0.0 {
            0.0
        } else {
            clipped
        }
    } else {
        0.0
    }
}

fn p1_kernel(req: &ProxRequest<'_>, out: &mut [f64]) {
    let spec = req.spec;
    let inv = 1.0 / (req.mu * req.alpha);
    let extra = spec.loss().l1_extra() / req.alpha;
    let (lo, hi) = (spec.bounds().lower(), spec.bounds().upper());
    for (j, o) in out.iter_mut().enumerate() {
        let tau = spec.lambda_bar()[j] * inv + extra;
        *o = shrink_clip(req.z[j], tau, lo[j], hi[j]);
    }
}

/// Weighted soft thresholding followed by clipping, for `p = 1` and any box.
/// Thresholded coordinates are exactly `+0.0`.
pub fn prox_p1_box(req: &ProxRequest<'_>) -> Result<Vec<f64>> {
    if req.spec.groups().p() != GroupNorm::L1 {
        return Err(Error::WrongDispatch("prox_p1_box needs p = 1 groups".into()));
    }
    let mut out = vec![0.0; req.z.len()];
    p1_kernel(req, &mut out);
    Ok(out)
}

fn p2_kernel(req: &ProxRequest<'_>, out: &mut [f64]) {
    let spec = req.spec;
    let inv = 1.0 / (req.mu * req.alpha);
    let tau1 = spec.lambda1() * inv + spec.loss().l1_extra() / req.alpha;
    for (o, &z) in out.iter_mut().zip(req.z) {
        *o = shrink_clip(z, tau1, f64::NEG_INFINITY, f64::INFINITY);
    }
    if spec.lambda2() == 0.0 {
        return;
    }
    let groups = spec.groups();
    for (members, w) in groups.groups().iter().zip(groups.weights()) {
        let norm = members.iter().map(|&j| out[j] * out[j]).sum::<f64>().sqrt();
        let tau2 = spec.lambda2() * w * inv;
        if norm <= tau2 {
            for &j in members {
                out[j] = 0.0;
            }
        } else {
            let factor = (norm - tau2) / norm;
            for &j in members {
                out[j] *= factor;
            }
        }
    }
}

/// Two-stage shrink for disjoint `p = 2` groups on `ℝⁿ`: soft threshold at
/// `λ1/(μα)`, then shrink each group norm by `λ2 w_l/(μα)`.
pub fn prox_p2_disjoint(req: &ProxRequest<'_>) -> Result<Vec<f64>> {
    let spec = req.spec;
    if spec.groups().p() != GroupNorm::L2 {
        return Err(Error::WrongDispatch("prox_p2_disjoint needs p = 2 groups".into()));
    }
    if !spec.groups().is_disjoint() {
        return Err(Error::Unsupported(
            "no closed-form prox for overlapping p = 2 groups".into(),
        ));
    }
    if !spec.bounds().is_unbounded() {
        return Err(Error::Unsupported(
            "no closed-form prox for p = 2 groups on a bounded box".into(),
        ));
    }
    let mut out = vec![0.0; req.z.len()];
    p2_kernel(req, &mut out);
    Ok(out)
}

/// Whether the subproblem reduces to the separable `p = 1` form: `p = 1`, or
/// no group term, or every group a singleton.
fn is_separable(spec: &ProblemSpec) -> bool {
    spec.groups().p() == GroupNorm::L1
        || spec.lambda2() == 0.0
        || spec.groups().groups().iter().all(|g| g.len() <= 1)
}

/// Checks up front that [`prox_into`] can handle this problem.
pub fn check_supported(spec: &ProblemSpec) -> Result<()> {
    if is_separable(spec) {
        return Ok(());
    }
    if !spec.groups().is_disjoint() {
        return Err(Error::Unsupported(
            "no closed-form prox for overlapping p = 2 groups".into(),
        ));
    }
    if !spec.bounds().is_unbounded() {
        return Err(Error::Unsupported(
            "no closed-form prox for p = 2 groups on a bounded box".into(),
        ));
    }
    Ok(())
}

/// Picks the closed form that applies to `req.spec` and writes the result to `out`.
pub fn prox_into(req: &ProxRequest<'_>, out: &mut [f64]) -> Result<()> {
    if is_separable(req.spec) {
        // singleton ℓ2 groups coincide with |x_j|, so the group weight folds into λ̄_j
        p1_kernel(req, out);
        return Ok(());
    }
    check_supported(req.spec)?;
    p2_kernel(req, out);
    Ok(())
}

pub fn prox(req: &ProxRequest<'_>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; req.z.len()];
    prox_into(req, &mut out)?;
    Ok(out)
}

/// Largest dimension [`prox_oracle`] accepts.
pub const ORACLE_MAX_DIM: usize = 4;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const ORACLE_TOL: f64 = 1e-11;

/// Derivative-free minimiser of the subproblem objective, for tests.
///
/// Block-coordinate descent iterated to a fixed point. Blocks are single
/// coordinates when the penalty is separable and whole groups otherwise; each
/// block is minimised by nested golden-section searches, each started from the
/// best of `grid_density + 1` equispaced samples. Coordinate `j` is searched in
/// `[z_j − ‖z‖, z_j + ‖z‖] ∩ [l_j, u_j]`, which contains the minimiser because
/// the objective at 0 is `(α/2)‖z‖²`.
pub fn prox_oracle(req: &ProxRequest<'_>, grid_density: usize) -> Result<Vec<f64>> {
    let n = req.z.len();
    if n > ORACLE_MAX_DIM {
        return Err(Error::TooLarge {
            what: "prox oracle dimension",
            n,
            limit: ORACLE_MAX_DIM,
        });
    }
    let density = grid_density.max(2);
    let radius = req.z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bounds = req.spec.bounds();
    let brackets: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            (
                (req.z[j] - radius).max(bounds.lower()[j]),
                (req.z[j] + radius).min(bounds.upper()[j]),
            )
        })
        .collect();
    let blocks: Vec<Vec<usize>> = if is_separable(req.spec) {
        (0..n).map(|j| vec![j]).collect()
    } else {
        let mut blocks: Vec<Vec<usize>> = req.spec.groups().groups().to_vec();
        let mut covered = vec![false; n];
        for &j in blocks.iter().flatten() {
            covered[j] = true;
        }
        blocks.extend((0..n).filter(|&j| !covered[j]).map(|j| vec![j]));
        blocks
    };

    let mut x: Vec<f64> = (0..n).map(|j| bounds.clip(j, 0.0)).collect();
    let mut value = req.objective(&x);
    for _sweep in 0..200 {
        let before = x.clone();
        for block in &blocks {
            value = minimise_block(req, &mut x, block, &brackets, density);
        }
        let moved = x
            .iter()
            .zip(&before)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if moved <= 1e-10 {
            break;
        }
    }
    debug_assert!(value.is_finite());
    Ok(x)
}

/// Minimises over the coordinates in `block` (others fixed); leaves the
/// minimiser in `x` and returns the objective value.
fn minimise_block(
    req: &ProxRequest<'_>,
    x: &mut [f64],
    block: &[usize],
    brackets: &[(f64, f64)],
    density: usize,
) -> f64 {
    minimise_nested(req, x, block, block, brackets, density)
}

fn minimise_nested(
    req: &ProxRequest<'_>,
    x: &mut [f64],
    block: &[usize],
    remaining: &[usize],
    brackets: &[(f64, f64)],
    density: usize,
) -> f64 {
    match remaining.split_first() {
        None => block_objective(req, x, block),
        Some((&j, rest)) => {
            let (lo, hi) = brackets[j];
            let eval = |t: f64, x: &mut [f64]| {
                x[j] = t;
                minimise_nested(req, x, block, rest, brackets, density)
            };
            let t = golden_section(&mut |t| eval(t, x), lo, hi, density);
            eval(t, x)
        }
    }
}

/// The objective with every coordinate outside `block` zeroed and its
/// quadratic term dropped. Since blocks never share an ℓ2 group, this differs
/// from the full objective by a constant, and avoids rounding against it.
fn block_objective(req: &ProxRequest<'_>, x: &[f64], block: &[usize]) -> f64 {
    let mut masked = vec![0.0; x.len()];
    for &j in block {
        masked[j] = x[j];
    }
    let quad: f64 = block.iter().map(|&j| (x[j] - req.z[j]) * (x[j] - req.z[j])).sum();
    req.penalty(&masked) + 0.5 * req.alpha * quad
}

fn golden_section(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, density: usize) -> f64 {
    if hi - lo <= 0.0 {
        return lo;
    }
    // coarse scan to pick the cell that holds the minimiser
    let h = (hi - lo) / density as f64;
    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..=density {
        let v = f(lo + h * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    // a zero inside the bracket is where the nonsmooth terms kink; keep it as a candidate
    let zero_v = if lo <= 0.0 && 0.0 <= hi { f(0.0) } else { f64::INFINITY };

    let mut a = lo + h * best_i.saturating_sub(1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > ORACLE_TOL * (1.0 + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    if zero_v <= f(t) {
        0.0
    } else {
        t
    }
}
