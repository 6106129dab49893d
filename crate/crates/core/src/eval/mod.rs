//! Binary classifier evaluation: confusion matrix, derived metrics, ROC/AUC
//! and the evaluation report.

mod metrics;
mod report;

pub use self::metrics::{auc, confusion_matrix, derived_metrics, roc_curve, ConfusionMatrix, DerivedMetrics, RocCurve};
pub use self::report::{evaluate, EvaluationReport, PerImage, PREDICTIONS_HEADER, ZERO_DENOMINATOR_NOTE};
