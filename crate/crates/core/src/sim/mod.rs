//! Closed-loop simulation: scenario assembly, the step loop, trace files,
//! summary metrics and controller comparison.

mod metrics;
mod run;
mod scenario;
mod trace;

pub use metrics::{compare, metrics, tank_balance_residual, Comparison, ComparisonRow, Metrics};
pub use run::{run, Simulation};
pub use scenario::Scenario;
pub use trace::{read_trace, read_trace_file, write_trace, SimulationTrace, TraceRecord, TRACE_COLUMNS};
