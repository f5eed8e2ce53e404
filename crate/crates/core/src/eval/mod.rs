//! Overlap and boundary metrics with bootstrap confidence intervals.

mod bootstrap;
mod metrics;
mod report;

pub use bootstrap::{bootstrap_ci, percentile, ConfidenceInterval, DEFAULT_RESAMPLES};
pub use metrics::{dice, hd95, iou, Hd95, Hd95Flag, Hd95Mode};
pub use report::{
    evaluate_dir, evaluate_pairs, EvalOptions, EvalReport, MetricSample, FLAG_HD95_BOTH_EMPTY, FLAG_HD95_EMPTY,
};
