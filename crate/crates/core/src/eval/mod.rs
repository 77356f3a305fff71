//! Metrics, multi-run aggregation, prediction import/export, the review
//! timeline document and throughput measurement.

mod bench;
mod metrics;
mod predictions;
mod timeline;

pub use bench::{bench_throughput, BenchReport, MIN_BENCH_SAMPLES};
pub use metrics::{
    aggregate_runs, f1_score, mann_whitney_u2, roc_auc, threshold_metrics, AggregateReport, MetricReport, MetricSpread,
};
pub use predictions::{
    parse_predictions, predictions_to_csv, read_predictions, scored_pairs, write_predictions, PredictionRecord, PREDICTION_HEADER,
};
pub use timeline::{
    export_timeline, TaskTrack, TimelineDocument, BELOW_THRESHOLD_OPACITY, DEFAULT_TIMELINE_THRESHOLD, DEFAULT_WINDOW_S,
    TIMELINE_MAGIC, TIMELINE_VERSION,
};
