//! Datasets, synthetic generation, cross-validation splits and metrics.

pub mod dataset;
pub mod metrics;
pub mod split;
pub mod synth;

pub use dataset::{filter_dataset, Dataset, RejectReason, Rejection};
pub use metrics::{compute_metrics, fn_breakdown, Averages, ClassMetrics, MeanStd, MetricsReport};
pub use split::{kfold_split, FoldSplit};
pub use synth::{synth_generate, EngagementConfig, SynthConfig};
