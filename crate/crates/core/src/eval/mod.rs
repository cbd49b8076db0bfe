//! Trajectory distances, success classifiers, parameter counts and robust
//! aggregation, plus the per-case report they feed.

mod metrics;
mod report;

pub use metrics::{
    aggregate, endpoint_distance, inter_human_variance, median, oscillation_metric,
    oscillation_per_axis, param_count, relaxed_time_success, rms_distance, trajectory_oscillation,
    Aggregate, ModelKind, RELAXED_TIME_MAX, RELAXED_TIME_MIN, SMOOTH_RATIO,
};
pub use report::{CaseRecord, EvalReport, GroupSummary, Scenario};
