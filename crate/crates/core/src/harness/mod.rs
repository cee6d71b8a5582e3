//! Splitting, training, evaluation and repeated-run experiments.

mod dataset;
mod experiment;
mod metrics;
mod split;
mod train;

pub use dataset::{dataset_from_manifest, extract_features, synthetic_dataset, Dataset};
pub use experiment::{
    mean_metrics, run_experiment, write_confusion_csv, write_curves_csv, write_per_class_csv, write_report_csv,
    Experiment, MeanMetrics, RunResult, MA_WINDOW,
};
pub use metrics::{harmonic, ClassMetrics, ConfusionMatrix, Metrics};
pub use split::{split_dataset, split_indices, Split, SplitSpec};
pub use train::{
    evaluate, moving_average, train, Curves, EpochRecord, EvalReport, IterationRecord, TrainConfig, EVAL_BATCH,
};
