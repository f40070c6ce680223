//! Load a problem from JSON, solve it, and write the trace as CSV.

use sgdc::io::parse_problem;
use sgdc::model::{RelaxationParams, DEFAULT_SAFETY};
use sgdc::solver::{solve, Algorithm, SolverConfig};

const PROBLEM: &str = r#"{
  "loss": {"kind": "least_squares", "a": {"dense": [[1, 0.5], [0, 1], [0.3, 0.2]]}, "b": [2, 0.05, 0.6]},
  "box": {"lower": [0, 0], "upper": [10, 10]},
  "groups": {"n": 2, "groups": [[0], [1]], "weights": [1, 1], "p": 1},
  "lambda1": 0.3
}"#;

fn main() -> sgdc::Result<()> {
    let spec = parse_problem(PROBLEM, None, "inline")?;
    let rp = RelaxationParams::derive(&spec, DEFAULT_SAFETY)?;
    let report = solve(&spec, &rp, &SolverConfig::default(), Algorithm::Extrapolation)?;
    println!("x = {:?} after {} iterations ({:?})", report.x_final, report.iterations, report.stop_reason);
    report.write_trace_csv(std::io::stdout().lock())
}
