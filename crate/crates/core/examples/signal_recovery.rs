//! Recover a sparse nonnegative signal from noisy measurements with both solvers.
//!
//! ```text
//! cargo run --release --example signal_recovery [n]
//! ```

use sgdc::bench::{run_signal_recovery, ExperimentSpec};
use sgdc::solver::Algorithm;

fn main() -> sgdc::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(160);
    println!("{:<14} {:>7} {:>11} {:>9} {:>6}", "algorithm", "k", "MSE", "|x|_0", "exact");
    for alg in [Algorithm::LineSearch, Algorithm::Extrapolation] {
        let mut es = ExperimentSpec::signal(n);
        es.algorithm = alg;
        let s = run_signal_recovery(&es, format!("{alg:?}"), 0)?.summary;
        println!(
            "{:<14} {:>7.1} {:>11.3e} {:>9.1} {:>3}/{}",
            s.label, s.mean_iterations, s.mean_mse, s.mean_support, s.support_exact, s.trials
        );
    }
    Ok(())
}
