//! Solve a 6-dimensional problem, certify the output, and compare it with
//! every local minimizer found by support enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdc::diagnostics::{certify, global_oracle, DEFAULT_CERTIFY_TOL};
use sgdc::linalg::{DenseMatrix, Matrix};
use sgdc::losses::LossModel;
use sgdc::model::*;
use sgdc::solver::{solve, Algorithm, SolverConfig};

fn main() -> sgdc::Result<()> {
    let (m, n) = (8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut a = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    let x_true = [3.0, 0.0, 0.0, 1.5, 0.0, 0.0];
    let b: Vec<f64> = (0..m).map(|i| a.row(i).iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
    let groups = GroupStructure::new(n, vec![vec![0, 1, 2], vec![3, 4, 5], vec![2, 3]], vec![1.0; 3], GroupNorm::L1)?;
    let spec = ProblemSpec::new(
        LossModel::least_squares(Matrix::Dense(a), b)?,
        BoxConstraint::uniform(n, 0.0, 5.0)?,
        groups,
        0.2,
        0.1,
    )?;
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY)?;
    let report = solve(&spec, &rp, &SolverConfig::default().with_x0(vec![1.0; n]), Algorithm::LineSearch)?;
    let cert = certify(&spec, &rp, &report.x_final, DEFAULT_CERTIFY_TOL)?;
    println!("x      = {:.6?}", report.x_final);
    println!("F0     = {:.8}, residual {:.1e}, certified {}", cert.f_primal, cert.stationarity_residual, cert.is_sw_d_stationary);

    let oracle = global_oracle(&spec, &rp)?;
    println!("global = {:.6?}, F0 = {:.8}", oracle.x_global, oracle.f_global);
    let hit = oracle
        .nu_strong()
        .find(|lm| lm.x.iter().zip(&report.x_final).all(|(p, q)| (p - q).abs() < 1e-6));
    match hit {
        Some(lm) => println!("matches the local minimizer on support {:?}", lm.allowed),
        None => println!("no enumerated local minimizer matches"),
    }
    Ok(())
}
