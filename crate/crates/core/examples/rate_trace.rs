//! Print `|F(x^k; μ_k) − F*|` against `k^-1, k^-2, k^-3` as CSV.

use sgdc::bench::{run_trial, ExperimentSpec};
use sgdc::diagnostics::{below_cubic_from, rate_trace, write_rate_csv};

fn main() -> sgdc::Result<()> {
    let detail = run_trial(&ExperimentSpec::signal(160), 0)?;
    let rows = rate_trace(&detail.report, None);
    write_rate_csv(&rows, std::io::stdout().lock())?;
    eprintln!("gap below k^-3 from k = {:?}", below_cubic_from(&rows));
    Ok(())
}
