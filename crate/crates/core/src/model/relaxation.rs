//! Capped-ℓ1 relaxation: the DC pieces, index vectors, the concave-part
//! subgradient, and the primal/relaxed objective values.

use crate::error::{Error, Result};
use crate::model::problem::{GroupNorm, GroupStructure, ProblemSpec};

/// `min{|t|/μ, 1}`.
pub fn capped_theta(t: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok((t.abs() / mu).min(1.0))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mu must be positive and finite, got {mu}")))
    }
}

/// Affine piece selected for one coordinate: `θ1 = 0`, `θ2 = t/μ − 1`, `θ3 = −t/μ − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordPiece {
    Flat,
    Positive,
    Negative,
}

impl CoordPiece {
    /// 1, 2 or 3.
    pub fn index(self) -> u8 {
        match self {
            CoordPiece::Flat => 1,
            CoordPiece::Positive => 2,
            CoordPiece::Negative => 3,
        }
    }

    pub fn value(self, t: f64, mu: f64) -> f64 {
        match self {
            CoordPiece::Flat => 0.0,
            CoordPiece::Positive => t / mu - 1.0,
            CoordPiece::Negative => -t / mu - 1.0,
        }
    }

    fn slope(self) -> f64 {
        match self {
            CoordPiece::Flat => 0.0,
            CoordPiece::Positive => 1.0,
            CoordPiece::Negative => -1.0,
        }
    }
}

/// Piece selected for one group norm: `θ1 = 0` or `θ2 = s/μ − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPiece {
    Flat,
    Active,
}

impl GroupPiece {
    pub fn index(self) -> u8 {
        match self {
            GroupPiece::Flat => 1,
            GroupPiece::Active => 2,
        }
    }

    pub fn value(self, s: f64, mu: f64) -> f64 {
        match self {
            GroupPiece::Flat => 0.0,
            GroupPiece::Active => s / mu - 1.0,
        }
    }
}

/// The `(I, J)` selection of active affine pieces of the concave part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVectors {
    pub coords: Vec<CoordPiece>,
    pub groups: Vec<GroupPiece>,
}

impl IndexVectors {
    pub fn i_indices(&self) -> Vec<u8> {
        self.coords.iter().map(|c| c.index()).collect()
    }

    pub fn j_indices(&self) -> Vec<u8> {
        self.groups.iter().map(|g| g.index()).collect()
    }
}

fn coord_piece(t: f64, mu: f64) -> CoordPiece {
    // ties at |t| = μ go to the larger index
    if t >= mu {
        CoordPiece::Positive
    } else if t <= -mu {
        CoordPiece::Negative
    } else {
        CoordPiece::Flat
    }
}

fn group_piece(norm: f64, mu: f64) -> GroupPiece {
    if norm >= mu {
        GroupPiece::Active
    } else {
        GroupPiece::Flat
    }
}

/// `I^x`, `J^x` at threshold `μ`: the maximal index among the maximising pieces.
pub fn index_vectors(x: &[f64], mu: f64, groups: &GroupStructure) -> IndexVectors {
    index_vectors_with_norms(x, mu, &groups.group_norms(x))
}

pub(crate) fn index_vectors_with_norms(x: &[f64], mu: f64, group_norms: &[f64]) -> IndexVectors {
    IndexVectors {
        coords: x.iter().map(|&t| coord_piece(t, mu)).collect(),
        groups: group_norms.iter().map(|&s| group_piece(s, mu)).collect(),
    }
}

/// `Θ_{I,J}(x; μ) = λ1 Σ θ_{I_j}(x_j; μ) + λ2 Σ w_l θ_{J_l}(‖x_(l)‖_p; μ)`.
pub fn theta_selection_value(x: &[f64], mu: f64, iv: &IndexVectors, spec: &ProblemSpec) -> f64 {
    let groups = spec.groups();
    let coord: f64 = x
        .iter()
        .zip(&iv.coords)
        .map(|(&t, piece)| piece.value(t, mu))
        .sum();
    let group: f64 = (0..groups.len())
        .map(|l| groups.weights()[l] * iv.groups[l].value(groups.group_norm(l, x), mu))
        .sum();
    spec.lambda1() * coord + spec.lambda2() * group
}

/// One deterministic element `ξ ∈ ∂Θ_{I,J}(x; μ)`.
///
/// For `p = 1` groups the kink at `x_j = 0` contributes 0. Fails if `iv` was
/// not produced by `(x, μ)`.
pub fn theta_subgradient(x: &[f64], mu: f64, iv: &IndexVectors, spec: &ProblemSpec) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let groups = spec.groups();
    if x.len() != spec.n() || iv.coords.len() != x.len() || iv.groups.len() != groups.len() {
        return Err(Error::ContractViolation(
            "index vectors do not match the problem dimensions".into(),
        ));
    }
    let norms = groups.group_norms(x);
    for (j, (&t, &piece)) in x.iter().zip(&iv.coords).enumerate() {
        if coord_piece(t, mu) != piece {
            return Err(Error::ContractViolation(format!(
                "I[{j}] = {} is inconsistent with x[{j}] = {t} at mu = {mu}",
                piece.index()
            )));
        }
    }
    for (l, (&s, &piece)) in norms.iter().zip(&iv.groups).enumerate() {
        if group_piece(s, mu) != piece {
            return Err(Error::ContractViolation(format!(
                "J[{l}] = {} is inconsistent with group norm {s} at mu = {mu}",
                piece.index()
            )));
        }
    }
    Ok(theta_subgradient_unchecked(x, mu, iv, &norms, spec))
}

pub(crate) fn theta_subgradient_unchecked(
    x: &[f64],
    mu: f64,
    iv: &IndexVectors,
    group_norms: &[f64],
    spec: &ProblemSpec,
) -> Vec<f64> {
    let lambda1_scaled = spec.lambda1() / mu;
    let mut xi: Vec<f64> = iv.coords.iter().map(|p| lambda1_scaled * p.slope()).collect();
    if spec.lambda2() == 0.0 {
        return xi;
    }
    let groups = spec.groups();
    for (l, members) in groups.groups().iter().enumerate() {
        if iv.groups[l] != GroupPiece::Active {
            continue;
        }
        let coef = spec.lambda2() * groups.weights()[l] / mu;
        match groups.p() {
            GroupNorm::L1 => {
                for &j in members {
                    xi[j] += coef * sign_or_zero(x[j]);
                }
            }
            GroupNorm::L2 => {
                // Active implies ‖x_(l)‖ ≥ μ > 0.
                let norm = group_norms[l];
                for &j in members {
                    xi[j] += coef * x[j] / norm;
                }
            }
        }
    }
    xi
}

fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `F_0(x) = f(x) + λ1 ‖x‖₀ + λ2 Σ w_l 𝟙[‖x_(l)‖_p ≠ 0]`, exact zero tests.
pub fn eval_primal(spec: &ProblemSpec, x: &[f64]) -> Result<f64> {
    let f = spec.loss().value(x)?;
    Ok(ObjectiveCache::new(spec, x, f).primal(spec))
}

/// `F(x; μ) = f(x) + λ1 Σ min{|x_j|/μ, 1} + λ2 Σ w_l min{‖x_(l)‖_p/μ, 1}`.
pub fn eval_relaxed(spec: &ProblemSpec, x: &[f64], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let f = spec.loss().value(x)?;
    Ok(ObjectiveCache::new(spec, x, f).relaxed(spec, mu))
}

/// Everything needed to re-evaluate `F(x; μ)` for any `μ` in `O(n + L)`
/// without touching the loss again.
#[derive(Debug, Clone)]
pub struct ObjectiveCache {
    pub f_value: f64,
    abs_x: Vec<f64>,
    group_norms: Vec<f64>,
}

impl ObjectiveCache {
    pub fn new(spec: &ProblemSpec, x: &[f64], f_value: f64) -> Self {
        Self {
            f_value,
            abs_x: x.iter().map(|v| v.abs()).collect(),
            group_norms: spec.groups().group_norms(x),
        }
    }

    pub fn group_norms(&self) -> &[f64] {
        &self.group_norms
    }

    pub fn relaxed(&self, spec: &ProblemSpec, mu: f64) -> f64 {
        let coord: f64 = self.abs_x.iter().map(|a| (a / mu).min(1.0)).sum();
        let mut value = self.f_value + spec.lambda1() * coord;
        if spec.lambda2() != 0.0 {
            let group: f64 = self
                .group_norms
                .iter()
                .zip(spec.groups().weights())
                .map(|(s, w)| w * (s / mu).min(1.0))
                .sum();
            value += spec.lambda2() * group;
        }
        value
    }

    pub fn primal(&self, spec: &ProblemSpec) -> f64 {
        let nonzeros = self.abs_x.iter().filter(|a| **a != 0.0).count() as f64;
        let mut value = self.f_value + spec.lambda1() * nonzeros;
        if spec.lambda2() != 0.0 {
            let group: f64 = self
                .group_norms
                .iter()
                .zip(spec.groups().weights())
                .filter(|(s, _)| **s != 0.0)
                .map(|(_, w)| w)
                .sum();
            value += spec.lambda2() * group;
        }
        value
    }
}
