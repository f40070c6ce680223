use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuation schedule `μ_k = max{M − k/d, ν}`.
///
/// `μ̄_k = M − k/d` is used while it stays above `ν`; from the first index `K`
/// with `μ̄_K ≤ ν` on, `μ_k = ν`. `M ≤ ν` (e.g. `M = 0`) disables continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuSchedule {
    pub start: f64,
    pub step_divisor: f64,
    pub nu: f64,
}

/// `μ̄_k = 5 − k/5`, the signal-recovery default.
pub const DEFAULT_START: f64 = 5.0;
pub const DEFAULT_STEP_DIVISOR: f64 = 5.0;

impl MuSchedule {
    pub fn new(start: f64, step_divisor: f64, nu: f64) -> Result<Self> {
        if !(step_divisor > 0.0 && step_divisor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step divisor must be positive, got {step_divisor}"
            )));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
        }
        if !start.is_finite() {
            return Err(Error::InvalidParameter(format!("schedule start must be finite, got {start}")));
        }
        Ok(Self {
            start,
            step_divisor,
            nu,
        })
    }

    pub fn default_for(nu: f64) -> Self {
        Self {
            start: DEFAULT_START,
            step_divisor: DEFAULT_STEP_DIVISOR,
            nu,
        }
    }

    /// Constant `μ_k = ν`.
    pub fn constant(nu: f64) -> Self {
        Self {
            start: 0.0,
            step_divisor: 1.0,
            nu,
        }
    }

    fn unclamped(&self, k: usize) -> f64 {
        self.start - k as f64 / self.step_divisor
    }

    pub fn mu_at(&self, k: usize) -> f64 {
        if k >= self.pinned_from() {
            self.nu
        } else {
            self.unclamped(k)
        }
    }

    /// `K`: the first index with `μ̄_K ≤ ν`.
    pub fn pinned_from(&self) -> usize {
        let guess = ((self.start - self.nu) * self.step_divisor).ceil().max(0.0) as usize;
        let mut k = guess;
        while self.unclamped(k) > self.nu {
            k += 1;
        }
        while k > 0 && self.unclamped(k - 1) <= self.nu {
            k -= 1;
        }
        k
    }
}

/// Free-function form of [`MuSchedule::mu_at`].
pub fn mu_at(schedule: &MuSchedule, k: usize) -> f64 {
    schedule.mu_at(k)
}
