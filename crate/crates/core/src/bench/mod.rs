//! Experiment runners: method sweeps, theorem checks and threshold traces.

pub mod sweep;
pub mod theorems;
pub mod trace;

pub use sweep::{
    draw_malicious, records_csv, run_sweep, summarize, summary_csv, trial_seed, Grid, GridPoint, Method, SweepSpec,
    SweepSummary, TrialRecord,
};
pub use theorems::{
    audit_perfect_run, check_error_bound, check_query_bound, check_reliability, reliability_run, QueryBoundStats, ReliabilityStats, Status,
    TheoremReport, RELIABILITY_TOLERANCE,
};
pub use trace::{convergence_summary, score_stream, trace_threshold, ConvergenceSummary, TrajectorySummary, INITIAL_EPSILONS};
