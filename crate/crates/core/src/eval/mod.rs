//! Splits, gate validation partitioning, metrics and the end-to-end
//! experiment driver.

pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod split;
pub mod tables;

pub use metrics::{gzsl_metrics, harmonic_mean, zsl_accuracy, GzslMetrics};
pub use partition::{partition_validation, ValidationPartition, GATE_SEEN_HOLDOUT};
pub use pipeline::{evaluate, run_gzssar_experiment, train_pipeline, EvalReport, ExperimentConfig, TrainedPipeline};
pub use split::SplitSpec;
pub use tables::{PublishedRow, PUBLISHED_ROWS};
