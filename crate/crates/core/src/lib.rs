//! Sparse group ℓ0-regularized optimization with box constraints.
//!
//! The ℓ0 and group-ℓ0 penalties are replaced by capped-ℓ1 surrogates whose
//! parameter `μ` is driven to a threshold `ν` by a continuation schedule. The
//! relaxed problem is a difference of convex functions, solved with two
//! proximal DC schemes: a nonmonotone line search and an extrapolated variant.

pub mod error;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod prox;
pub mod solver;
pub mod diagnostics;
pub mod bench;
pub mod io;
pub mod cli;
mod serde_ext;

pub use error::{Error, Result};
