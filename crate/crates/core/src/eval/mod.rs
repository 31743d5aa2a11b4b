//! ROC analysis, the boxplot baseline and the comparison experiment.

pub mod boxplot;
pub mod experiment;
pub mod roc;

pub use boxplot::BoxplotModel;
pub use experiment::{run_experiment, ExperimentReport, RunRecord};
pub use roc::{roc_auc, RocCurve};
