//! Problem instances and the capped-ℓ1 relaxation.

pub mod problem;
pub mod relaxation;
pub mod schedule;

pub use problem::{
    BoxConstraint, GroupNorm, GroupStructure, ProblemSpec, RelaxationParams, DEFAULT_SAFETY,
};
pub use relaxation::{
    capped_theta, eval_primal, eval_relaxed, index_vectors, theta_selection_value,
    theta_subgradient, CoordPiece, GroupPiece, IndexVectors, ObjectiveCache,
};
pub use schedule::{mu_at, MuSchedule};
