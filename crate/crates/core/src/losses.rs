//! Convex losses `f = f_s + λ_extra‖·‖₁` with `f_s` smooth.
//!
//! * least squares `‖Ax − b‖²` (no ½ factor),
//! * logistic `Σ log(1 + exp(−b_i A_i x))` with `b_i ∈ {−1, 1}`,
//! * Poisson `Σ (−b_i A_i x + exp(A_i x))` with `b_i ∈ ℕ`.
//!
//! Besides values and gradients this module provides the two constants the
//! solvers need: `L_s` (Lipschitz modulus of `∇f_s`) and `L_f` (a uniform bound
//! on the components of `∂f` over the box).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm_inf, spectral_norm, LinearOperator, Matrix};
use crate::model::BoxConstraint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    Logistic,
    Poisson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LossRepr", into = "LossRepr")]
pub struct LossModel {
    kind: LossKind,
    a: Matrix,
    b: Vec<f64>,
    l1_extra: f64,
}

#[derive(Serialize, Deserialize)]
struct LossRepr {
    kind: LossKind,
    a: Matrix,
    b: Vec<f64>,
    #[serde(default)]
    l1_extra: f64,
}

impl TryFrom<LossRepr> for LossModel {
    type Error = Error;
    fn try_from(r: LossRepr) -> Result<Self> {
        LossModel::new(r.kind, r.a, r.b, r.l1_extra)
    }
}

impl From<LossModel> for LossRepr {
    fn from(m: LossModel) -> Self {
        LossRepr {
            kind: m.kind,
            a: m.a,
            b: m.b,
            l1_extra: m.l1_extra,
        }
    }
}

impl LossModel {
    pub fn new(kind: LossKind, a: Matrix, b: Vec<f64>, l1_extra: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if !(l1_extra >= 0.0 && l1_extra.is_finite()) {
            return Err(Error::InvalidParameter(format!("l1_extra must be >= 0, got {l1_extra}")));
        }
        match kind {
            LossKind::Logistic => {
                if let Some(i) = b.iter().position(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "logistic labels must be -1 or 1; b[{i}] = {}",
                        b[i]
                    )));
                }
            }
            LossKind::Poisson => {
                if let Some(i) = b.iter().position(|&v| !(v >= 0.0 && v.fract() == 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "Poisson counts must be nonnegative integers; b[{i}] = {}",
                        b[i]
                    )));
                }
            }
            LossKind::LeastSquares => {
                if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("b[{i}] is not finite")));
                }
            }
        }
        Ok(Self { kind, a, b, l1_extra })
    }

    pub fn least_squares(a: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(LossKind::LeastSquares, a, b, 0.0)
    }

    pub fn logistic(a: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(LossKind::Logistic, a, b, 0.0)
    }

    pub fn poisson(a: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(LossKind::Poisson, a, b, 0.0)
    }

    /// Adds `λ_extra ‖x‖₁` as the nonsmooth part `f_n`.
    pub fn with_l1(mut self, l1_extra: f64) -> Result<Self> {
        if !(l1_extra >= 0.0 && l1_extra.is_finite()) {
            return Err(Error::InvalidParameter(format!("l1_extra must be >= 0, got {l1_extra}")));
        }
        self.l1_extra = l1_extra;
        Ok(self)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn observations(&self) -> &[f64] {
        &self.b
    }

    pub fn l1_extra(&self) -> f64 {
        self.l1_extra
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} entries, loss expects {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `Ax`.
    pub fn image(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.m()];
        self.a.apply(x, &mut ax);
        ax
    }

    /// `f_s` given `Ax`.
    pub fn smooth_value_at_image(&self, ax: &[f64]) -> Result<f64> {
        match self.kind {
            LossKind::LeastSquares => Ok(ax
                .iter()
                .zip(&self.b)
                .map(|(t, b)| (t - b) * (t - b))
                .sum()),
            LossKind::Logistic => Ok(ax
                .iter()
                .zip(&self.b)
                .map(|(t, b)| log1p_exp(-b * t))
                .sum()),
            LossKind::Poisson => {
                let mut total = 0.0;
                for (i, (t, b)) in ax.iter().zip(&self.b).enumerate() {
                    let e = checked_exp(*t, i)?;
                    total += e - b * t;
                }
                Ok(total)
            }
        }
    }

    /// `f = f_s + λ_extra‖x‖₁` given `x` and `Ax`.
    pub fn value_at_image(&self, x: &[f64], ax: &[f64]) -> Result<f64> {
        let smooth = self.smooth_value_at_image(ax)?;
        Ok(if self.l1_extra != 0.0 {
            smooth + self.l1_extra * norm1(x)
        } else {
            smooth
        })
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.value_at_image(x, &self.image(x))
    }

    /// `∇f_s` given `Ax`, written into `out`.
    pub fn smooth_gradient_at_image(&self, ax: &[f64], out: &mut [f64]) -> Result<()> {
        let mut u = vec![0.0; ax.len()];
        match self.kind {
            LossKind::LeastSquares => {
                for ((ui, t), b) in u.iter_mut().zip(ax).zip(&self.b) {
                    *ui = 2.0 * (t - b);
                }
            }
            LossKind::Logistic => {
                for ((ui, t), b) in u.iter_mut().zip(ax).zip(&self.b) {
                    // −b σ(−b t) = −b / (1 + exp(b t))
                    *ui = -b * sigmoid(-b * t);
                }
            }
            LossKind::Poisson => {
                for (i, ((ui, t), b)) in u.iter_mut().zip(ax).zip(&self.b).enumerate() {
                    *ui = checked_exp(*t, i)? - b;
                }
            }
        }
        self.a.adjoint(&u, out);
        Ok(())
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.n()];
        self.smooth_gradient_at_image(&self.image(x), &mut g)?;
        Ok(g)
    }
}

fn log1p_exp(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn checked_exp(t: f64, row: usize) -> Result<f64> {
    let e = t.exp();
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Evaluation {
            row,
            message: format!("exp({t}) overflows"),
        })
    }
}

/// `f(x)`, including the optional ℓ1 part.
pub fn eval_loss(model: &LossModel, x: &[f64]) -> Result<f64> {
    model.value(x)
}

/// `∇f_s(x)`.
pub fn grad_loss(model: &LossModel, x: &[f64]) -> Result<Vec<f64>> {
    model.smooth_gradient(x)
}

/// Lipschitz modulus `L_s` of `∇f_s` over the box.
pub fn smoothness_constant(model: &LossModel, bounds: &BoxConstraint) -> Result<f64> {
    let sigma = spectral_norm(model.matrix());
    let sq = sigma * sigma;
    match model.kind() {
        LossKind::LeastSquares => Ok(2.0 * sq),
        LossKind::Logistic => Ok(sq / 4.0),
        LossKind::Poisson => {
            if !bounds.is_finite() {
                return Err(Error::Unsupported(
                    "the Poisson gradient is only Lipschitz on a finite box".into(),
                ));
            }
            let (_, hi) = image_intervals(model.matrix(), bounds);
            let max_hi = hi.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
            let scale = if max_hi.is_finite() { max_hi.exp() } else { 1.0 };
            if !scale.is_finite() {
                return Err(Error::Evaluation {
                    row: hi.iter().position(|v| *v == max_hi).unwrap_or(0),
                    message: "exp of the row bound overflows".into(),
                });
            }
            Ok(sq * scale)
        }
    }
}

fn interval_product(a: f64, lo: f64, hi: f64) -> (f64, f64) {
    if a == 0.0 {
        return (0.0, 0.0);
    }
    let (p, q) = (a * lo, a * hi);
    (p.min(q), p.max(q))
}

/// `[min, max]` of every `A_i x` over the box.
fn image_intervals(a: &Matrix, bounds: &BoxConstraint) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![0.0; a.nrows()];
    let mut hi = vec![0.0; a.nrows()];
    let (l, u) = (bounds.lower(), bounds.upper());
    a.for_each_entry(&mut |i, j, v| {
        let (p, q) = interval_product(v, l[j], u[j]);
        lo[i] += p;
        hi[i] += q;
    });
    (lo, hi)
}

/// `max_j max(|G_lo_j|, |G_hi_j|)` for `G = Aᵀ r` with `r_i ∈ [r_lo_i, r_hi_i]`.
fn adjoint_interval_bound(a: &Matrix, r_lo: &[f64], r_hi: &[f64]) -> f64 {
    let mut g_lo = vec![0.0; a.ncols()];
    let mut g_hi = vec![0.0; a.ncols()];
    a.for_each_entry(&mut |i, j, v| {
        let (p, q) = interval_product(v, r_lo[i], r_hi[i]);
        g_lo[j] += p;
        g_hi[j] += q;
    });
    g_lo.iter()
        .zip(&g_hi)
        .fold(0.0, |acc, (p, q)| acc.max(p.abs()).max(q.abs()))
}

/// A uniform bound `L_f ≥ sup{|[∇f_s(y)]_j + [∂f_n(x)]_j| : x, y ∈ box}`.
///
/// For least squares on `[0, w]^n` this is exactly
/// `t = |A|ᵀ(|A| 1)`, `L_f = 2 max(‖w t − Aᵀb‖∞, ‖−w t − Aᵀb‖∞)`.
/// Other boxes use interval arithmetic on `2Aᵀ(Ax − b)`. The logistic bound is
/// the largest column absolute sum since the residual lies in (−1, 1).
pub fn estimate_lf(model: &LossModel, bounds: &BoxConstraint) -> Result<f64> {
    let a = model.matrix();
    let smooth = match model.kind() {
        LossKind::LeastSquares => {
            if let Some(w) = bounds.as_nonnegative_cube() {
                let mut row_abs = vec![0.0; a.nrows()];
                a.abs_apply(&vec![1.0; a.ncols()], &mut row_abs);
                let mut t = vec![0.0; a.ncols()];
                a.abs_adjoint(&row_abs, &mut t);
                let mut atb = vec![0.0; a.ncols()];
                a.adjoint(model.observations(), &mut atb);
                let plus: Vec<f64> = t.iter().zip(&atb).map(|(t, c)| w * t - c).collect();
                let minus: Vec<f64> = t.iter().zip(&atb).map(|(t, c)| -w * t - c).collect();
                2.0 * norm_inf(&plus).max(norm_inf(&minus))
            } else {
                let (lo, hi) = image_intervals(a, bounds);
                let b = model.observations();
                let r_lo: Vec<f64> = lo.iter().zip(b).map(|(v, b)| v - b).collect();
                let r_hi: Vec<f64> = hi.iter().zip(b).map(|(v, b)| v - b).collect();
                2.0 * adjoint_interval_bound(a, &r_lo, &r_hi)
            }
        }
        LossKind::Logistic => {
            let mut col_abs = vec![0.0; a.ncols()];
            a.abs_adjoint(&vec![1.0; a.nrows()], &mut col_abs);
            norm_inf(&col_abs)
        }
        LossKind::Poisson => {
            if !bounds.is_finite() {
                return Err(Error::Unsupported(
                    "the Poisson gradient bound needs a finite box".into(),
                ));
            }
            let (lo, hi) = image_intervals(a, bounds);
            let b = model.observations();
            let r_lo: Vec<f64> = lo.iter().zip(b).map(|(v, b)| v.exp() - b).collect();
            let r_hi: Vec<f64> = hi.iter().zip(b).map(|(v, b)| v.exp() - b).collect();
            adjoint_interval_bound(a, &r_lo, &r_hi)
        }
    };
    let lf = smooth + model.l1_extra();
    if !lf.is_finite() {
        return Err(Error::Unsupported(
            "no finite gradient bound on this box (least squares needs finite bounds on \
             coordinates with nonzero columns)"
                .into(),
        ));
    }
    if lf <= 0.0 {
        return Err(Error::InvalidParameter(
            "L_f = 0 (the loss is constant on the box); nu is undefined".into(),
        ));
    }
    Ok(lf)
}
