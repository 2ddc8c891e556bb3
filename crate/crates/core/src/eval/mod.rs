//! Sequence-level inference, binary metrics, ROC/AUC, grading histograms and
//! the per-view and ablation experiment harnesses.

mod experiments;
mod grading;
mod infer;
mod metrics;
mod report;

pub use experiments::{
    ablation_runner, all_view_rows, per_view_experiment, train_and_evaluate, window_means, write_ablation_tables,
    write_view_table, AblationCell, RunResult, RunSpec, ViewRow, ABLATION_GRID_FILE, TEMPORAL_KERNEL_TABLE_FILE,
    TRIPLET_TABLE_FILE,
};
pub use grading::{
    cohort_histogram, grading_histogram, probability_bin, CohortHistogram, GradingHistogram, ScaleHistogram,
    GRADING_BINS,
};
pub use infer::{infer_sequence_probability, predict_sequences, window_starts};
pub use metrics::{
    auc_pairwise, compute_auc, compute_metrics, confusion, ConfusionCounts, Metrics, Roc, RocPoint, DEFAULT_THRESHOLD,
};
pub use report::{
    grading_from_predictions, predict_split, report_from_predictions, write_json, write_metrics_csv,
    write_predictions_csv, MetricsReport, Prediction, Summary, METRICS_HEADER,
};
