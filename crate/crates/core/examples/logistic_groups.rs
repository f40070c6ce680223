//! Sparse group logistic regression with disjoint Euclidean groups and no box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgdc::diagnostics::{certify, DEFAULT_CERTIFY_TOL};
use sgdc::linalg::{DenseMatrix, Matrix};
use sgdc::losses::LossModel;
use sgdc::model::*;
use sgdc::solver::{solve, Algorithm, SolverConfig};

fn main() -> sgdc::Result<()> {
    let (m, n) = (200, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = [2.0, -1.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut a = DenseMatrix::zeros(m, n);
    let mut y = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            a.set(i, j, rng.sample(StandardNormal));
        }
        let t: f64 = a.row(i).iter().zip(&w).map(|(p, q)| p * q).sum();
        y[i] = if rng.random::<f64>() < 1.0 / (1.0 + (-t).exp()) { 1.0 } else { -1.0 };
    }
    let spec = ProblemSpec::new(
        LossModel::logistic(Matrix::Dense(a), y)?,
        BoxConstraint::unbounded(n),
        GroupStructure::consecutive(n, 3, 1.0, GroupNorm::L2)?,
        2.0,
        4.0,
    )?;
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY)?;
    for alg in [Algorithm::LineSearch, Algorithm::Extrapolation] {
        let r = solve(&spec, &rp, &SolverConfig::default(), alg)?;
        let c = certify(&spec, &rp, &r.x_final, DEFAULT_CERTIFY_TOL)?;
        println!("{alg:?}: {} iterations, support {:?}, certified {}", r.iterations, c.support, c.is_sw_d_stationary);
        println!("  x = {:.3?}", r.x_final);
    }
    Ok(())
}
