//! Confusion matrices, per-emotion accuracy reports and the pooled-SD
//! Student's t test.

mod report;
mod ttest;

pub use report::{
    evaluate_alpha_sweep, evaluate_split, ConfusionMatrix, EmotionAccuracy, EvaluationReport,
    Prediction, ReportMeta,
};
pub use ttest::{pooled_sd, sample_sd, students_t, SignificanceResult, T_CRITICAL_05};
