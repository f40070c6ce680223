use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{estimate_lf, LossModel};
use crate::model::schedule::MuSchedule;

/// The feasible box `[lower, upper]`. Zero is always feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BoxConstraint {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    #[serde(with = "crate::serde_ext::float_vec")]
    lower: Vec<f64>,
    #[serde(with = "crate::serde_ext::float_vec")]
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for BoxConstraint {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        BoxConstraint::new(r.lower, r.upper)
    }
}

impl From<BoxConstraint> for BoxRepr {
    fn from(b: BoxConstraint) -> Self {
        BoxRepr {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl BoxConstraint {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "box lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > 0.0 || u < 0.0 || l >= u {
                return Err(Error::InvalidParameter(format!(
                    "box coordinate {j}: need lower <= 0 <= upper and lower < upper, got [{l}, {u}]"
                )));
            }
        }
        // normalise -0.0 so clipped zeros are +0.0 bitwise
        let lower = lower.into_iter().map(|l| l + 0.0).collect();
        let upper = upper.into_iter().map(|u| u + 0.0).collect();
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^n`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    /// `ℝⁿ`.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|v| *v == f64::NEG_INFINITY)
            && self.upper.iter().all(|v| *v == f64::INFINITY)
    }

    /// `Some(w)` when the box is exactly `[0, w]^n` with finite `w`.
    pub fn as_nonnegative_cube(&self) -> Option<f64> {
        let w = *self.upper.first()?;
        let cube = w.is_finite()
            && self.lower.iter().all(|&l| l == 0.0)
            && self.upper.iter().all(|&u| u == w);
        cube.then_some(w)
    }

    /// Smallest nonzero finite bound magnitude; `+∞` when there is none.
    pub fn vartheta(&self) -> f64 {
        self.lower
            .iter()
            .chain(&self.upper)
            .filter(|v| v.is_finite() && **v != 0.0)
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clip(&self, j: usize, v: f64) -> f64 {
        v.max(self.lower[j]).min(self.upper[j])
    }

    pub fn project(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = self.clip(j, *v);
        }
    }
}

/// Which norm the group term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum GroupNorm {
    L1,
    L2,
}

impl TryFrom<u8> for GroupNorm {
    type Error = Error;
    fn try_from(p: u8) -> Result<Self> {
        match p {
            1 => Ok(GroupNorm::L1),
            2 => Ok(GroupNorm::L2),
            other => Err(Error::InvalidParameter(format!("p must be 1 or 2, got {other}"))),
        }
    }
}

impl From<GroupNorm> for u8 {
    fn from(p: GroupNorm) -> u8 {
        match p {
            GroupNorm::L1 => 1,
            GroupNorm::L2 => 2,
        }
    }
}

impl GroupNorm {
    pub fn norm_of(self, values: impl Iterator<Item = f64>) -> f64 {
        match self {
            GroupNorm::L1 => values.map(f64::abs).sum(),
            GroupNorm::L2 => values.map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Groups `G_l` (0-based, strictly increasing indices), their weights, and `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupRepr", into = "GroupRepr")]
pub struct GroupStructure {
    n: usize,
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    p: GroupNorm,
    disjoint: bool,
    /// `Σ_{l ∋ j} w_l` for every coordinate.
    column_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    n: usize,
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    p: GroupNorm,
}

impl TryFrom<GroupRepr> for GroupStructure {
    type Error = Error;
    fn try_from(r: GroupRepr) -> Result<Self> {
        GroupStructure::new(r.n, r.groups, r.weights, r.p)
    }
}

impl From<GroupStructure> for GroupRepr {
    fn from(g: GroupStructure) -> Self {
        GroupRepr {
            n: g.n,
            groups: g.groups,
            weights: g.weights,
            p: g.p,
        }
    }
}

impl GroupStructure {
    pub fn new(n: usize, groups: Vec<Vec<usize>>, weights: Vec<f64>, p: GroupNorm) -> Result<Self> {
        if groups.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} groups but {} weights",
                groups.len(),
                weights.len()
            )));
        }
        if let Some((l, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("group {l} has weight {w}; need w >= 0")));
        }
        let mut covered = vec![0usize; n];
        let mut column_weights = vec![0.0; n];
        for (l, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidParameter(format!("group {l} is empty")));
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "group {l} indices must be strictly increasing"
                )));
            }
            if let Some(&j) = g.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidParameter(format!(
                    "group {l} contains index {j} but n = {n}"
                )));
            }
            for &j in g {
                covered[j] += 1;
                column_weights[j] += weights[l];
            }
        }
        if let Some(j) = covered.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {j} belongs to no group; groups must cover every index"
            )));
        }
        let disjoint = covered.iter().all(|&c| c == 1);
        if p == GroupNorm::L2 && !disjoint {
            return Err(Error::Unsupported(
                "p = 2 requires pairwise disjoint groups".into(),
            ));
        }
        Ok(Self {
            n,
            groups,
            weights,
            p,
            disjoint,
            column_weights,
        })
    }

    /// Every coordinate its own group with unit weight (`p = 1`).
    pub fn singletons(n: usize) -> Self {
        Self::new(n, (0..n).map(|j| vec![j]).collect(), vec![1.0; n], GroupNorm::L1)
            .expect("singletons are a valid partition")
    }

    /// Consecutive blocks of `size` coordinates; `n` must be divisible by `size`.
    pub fn consecutive(n: usize, size: usize, weight: f64, p: GroupNorm) -> Result<Self> {
        if size == 0 || !n.is_multiple_of(size) {
            return Err(Error::InvalidParameter(format!(
                "cannot split {n} coordinates into blocks of {size}"
            )));
        }
        let groups = (0..n / size)
            .map(|l| (l * size..(l + 1) * size).collect())
            .collect();
        Self::new(n, groups, vec![weight; n / size], p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> GroupNorm {
        self.p
    }

    pub fn is_disjoint(&self) -> bool {
        self.disjoint
    }

    pub fn column_weights(&self) -> &[f64] {
        &self.column_weights
    }

    pub fn group_norm(&self, l: usize, x: &[f64]) -> f64 {
        self.p.norm_of(self.groups[l].iter().map(|&j| x[j]))
    }

    pub fn group_norms(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|l| self.group_norm(l, x)).collect()
    }
}

/// A full instance: `min_{x∈box} f(x) + λ1‖x‖₀ + λ2 Σ w_l 𝟙[‖x_(l)‖_p ≠ 0]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct ProblemSpec {
    loss: LossModel,
    bounds: BoxConstraint,
    groups: GroupStructure,
    lambda1: f64,
    lambda2: f64,
    lambda_bar: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProblemRepr {
    loss: LossModel,
    #[serde(rename = "box")]
    bounds: BoxConstraint,
    groups: GroupStructure,
    lambda1: f64,
    #[serde(default)]
    lambda2: f64,
}

impl TryFrom<ProblemRepr> for ProblemSpec {
    type Error = Error;
    fn try_from(r: ProblemRepr) -> Result<Self> {
        ProblemSpec::new(r.loss, r.bounds, r.groups, r.lambda1, r.lambda2)
    }
}

impl From<ProblemSpec> for ProblemRepr {
    fn from(p: ProblemSpec) -> Self {
        ProblemRepr {
            loss: p.loss,
            bounds: p.bounds,
            groups: p.groups,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
        }
    }
}

impl ProblemSpec {
    pub fn new(
        loss: LossModel,
        bounds: BoxConstraint,
        groups: GroupStructure,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda1.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda1 must be > 0, got {lambda1}")));
        }
        Self::assemble(loss, bounds, groups, lambda1, lambda2)
    }

    /// Skips the `λ1 > 0` check; only for probing the group term in isolation.
    #[cfg(test)]
    pub(crate) fn new_unchecked_lambda1(
        loss: LossModel,
        bounds: BoxConstraint,
        groups: GroupStructure,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        Self::assemble(loss, bounds, groups, lambda1, lambda2)
    }

    fn assemble(
        loss: LossModel,
        bounds: BoxConstraint,
        groups: GroupStructure,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        let n = loss.n();
        if bounds.len() != n || groups.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "loss has n = {n}, box has {}, groups cover {}",
                bounds.len(),
                groups.n()
            )));
        }
        let lambda_bar = groups
            .column_weights()
            .iter()
            .map(|cw| lambda1 + lambda2 * cw)
            .collect();
        Ok(Self {
            loss,
            bounds,
            groups,
            lambda1,
            lambda2,
            lambda_bar,
        })
    }

    pub fn n(&self) -> usize {
        self.loss.n()
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }

    pub fn bounds(&self) -> &BoxConstraint {
        &self.bounds
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `λ̄_j = λ1 + λ2 Σ_{l ∋ j} w_l`, the per-coordinate ℓ1 weight when `p = 1`.
    pub fn lambda_bar(&self) -> &[f64] {
        &self.lambda_bar
    }
}

/// Default safety factor applied to `min{λ1/L_f, ϑ}` when deriving `ν`.
pub const DEFAULT_SAFETY: f64 = 0.99;

/// `ν`, `L_f`, `ϑ` and the continuation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub nu: f64,
    pub lf: f64,
    #[serde(with = "crate::serde_ext::float")]
    pub vartheta: f64,
    pub safety: f64,
    pub schedule: MuSchedule,
}

impl RelaxationParams {
    /// Derives `ν = safety · min{λ1/L_f, ϑ}` with `L_f` from [`estimate_lf`].
    pub fn derive(spec: &ProblemSpec, safety: f64) -> Result<Self> {
        let lf = estimate_lf(spec.loss(), spec.bounds())?;
        Self::from_lf(spec, lf, safety)
    }

    /// Same as [`derive`](Self::derive) with a caller-supplied `L_f`.
    pub fn from_lf(spec: &ProblemSpec, lf: f64, safety: f64) -> Result<Self> {
        if !(safety > 0.0 && safety < 1.0) {
            return Err(Error::InvalidParameter(format!("safety must lie in (0, 1), got {safety}")));
        }
        if !(lf > 0.0 && lf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "L_f must be finite and positive, got {lf}"
            )));
        }
        let vartheta = spec.bounds().vartheta();
        let nu = safety * (spec.lambda1() / lf).min(vartheta);
        Ok(Self {
            nu,
            lf,
            vartheta,
            safety,
            schedule: MuSchedule::default_for(nu),
        })
    }

    /// Replaces the schedule, keeping `ν`.
    pub fn with_schedule(mut self, start: f64, step_divisor: f64) -> Result<Self> {
        self.schedule = MuSchedule::new(start, step_divisor, self.nu)?;
        Ok(self)
    }

    /// Checks `ν < min{λ1/L_f, ϑ}`.
    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let cap = (spec.lambda1() / self.lf).min(self.vartheta);
        if !(self.nu > 0.0 && self.nu < cap) {
            return Err(Error::InvalidParameter(format!(
                "nu = {} must lie in (0, min(lambda1/Lf, vartheta) = {cap})",
                self.nu
            )));
        }
        if self.schedule.nu != self.nu {
            return Err(Error::InvalidParameter(
                "schedule floor differs from nu".into(),
            ));
        }
        Ok(())
    }
}
