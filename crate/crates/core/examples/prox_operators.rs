//! Closed-form proximal maps of the capped-ℓ1 terms, checked against a
//! brute-force numerical minimisation.

use sgdc::linalg::{DenseMatrix, Matrix};
use sgdc::losses::LossModel;
use sgdc::model::*;
use sgdc::prox::{prox, prox_oracle, ProxRequest};

fn problem(bounds: BoxConstraint, groups: GroupStructure, l1: f64, l2: f64) -> sgdc::Result<ProblemSpec> {
    let n = bounds.len();
    let loss = LossModel::least_squares(Matrix::Dense(DenseMatrix::identity(n)), vec![0.0; n])?;
    ProblemSpec::new(loss, bounds, groups, l1, l2)
}

fn main() -> sgdc::Result<()> {
    // Euclidean group norm, one group.
    let g = GroupStructure::new(2, vec![vec![0, 1]], vec![1.0], GroupNorm::L2)?;
    let spec = problem(BoxConstraint::unbounded(2), g, 1.0, 1.0)?;
    let req = ProxRequest::new(&[3.0, 4.0], 1.0, 1.0, &spec)?;
    println!("p = 2: z = (3, 4) -> {:.6?}", prox(&req)?);
    println!("       oracle      {:.6?}", prox_oracle(&req, 30)?);

    // ℓ1 group norm with overlapping groups and a box.
    let g = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], vec![1.0, 0.5], GroupNorm::L1)?;
    let spec = problem(BoxConstraint::uniform(3, 0.0, 2.0)?, g, 0.3, 0.4)?;
    let z = [2.7, 0.4, -0.3];
    let req = ProxRequest::new(&z, 2.0, 0.8, &spec)?;
    println!("p = 1: z = {z:?} -> {:.6?}", prox(&req)?);
    println!("       oracle           {:.6?}", prox_oracle(&req, 30)?);
    Ok(())
}
