//! Run logs, convergence/efficiency metrics and the duplicate-sample theory
//! checks.

mod census;
mod metrics;
pub mod runlog;
mod theory;

pub use census::duplicate_census;
pub use metrics::{convergence_point, metric_deltas, translate_rewards, MetricDeltas, MetricsRow, CONVERGENCE_BAND};
pub use runlog::{EvalRecord, FinalRecord, LogRecord, RunLog, StepRecord};
pub use theory::{
    entropy_brute_force, entropy_delta_closed_form, variance_factor, variance_ratio_experiment, VarianceRatio,
};
