//! Classification metrics, ROC/AUC, cohort statistical tests.
//!
//! The cross-validation driver lives in [`crate::pipeline`].

mod cohort;
mod metrics;
mod roc;
mod stats;

pub use cohort::{cohort_summary, CategoryRow, CohortSummary, ContinuousRow, ClassStats};
pub use metrics::{
    class_similarity, classification_report, ClassMetrics, Confusion, MetricSummary,
    MetricsReport, Averages,
};
pub use roc::{roc_auc, RocCurve, RocPoint};
pub use stats::{fisher_exact, mann_whitney_u, MannWhitney, EXACT_MANN_WHITNEY_MAX_N};
