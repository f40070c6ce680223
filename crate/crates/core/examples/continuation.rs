//! Effect of the continuation start `M` in `μ_k = max(M − k/5, ν)`.
//! `M = 0` solves with `μ = ν` from the start and gets stuck.

use sgdc::bench::{run_signal_recovery, ExperimentSpec};

fn main() -> sgdc::Result<()> {
    println!("{:>4} {:>8} {:>11}", "M", "k", "MSE");
    for m in [0.0, 1.0, 5.0, 20.0] {
        let mut es = ExperimentSpec::signal(160);
        es.schedule_start = m;
        let s = run_signal_recovery(&es, "", 0)?.summary;
        println!("{m:>4} {:>8.1} {:>11.3e}", s.mean_iterations, s.mean_mse);
    }
    Ok(())
}
